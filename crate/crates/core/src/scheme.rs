//! Progressive Type-II censoring schemes and the space CS(n, m).

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("removals sum to {actual}, expected n - m = {expected}")]
    SumMismatch { expected: u64, actual: u64 },
    #[error("removal at position {position} is negative ({value})")]
    NegativeRemoval { position: usize, value: i64 },
    #[error("bad dimensions: n = {n}, m = {m}, {len} removals")]
    BadDimensions { n: u64, m: u64, len: usize },
    #[error("cannot parse scheme `{0}`")]
    Parse(String),
}

/// A censoring scheme `(R_1, ..., R_m)` for `n` units with `m` observed failures.
///
/// Always valid: `m >= 1`, `n >= m` and the removals sum to `n - m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Scheme {
    n: u32,
    removals: Vec<u32>,
}

fn check_dims(n: u64, m: u64, len: usize) -> Result<(), SchemeError> {
    if m < 1 || n < m || len as u64 != m || n > u32::MAX as u64 {
        return Err(SchemeError::BadDimensions { n, m, len });
    }
    Ok(())
}

impl Scheme {
    /// Validate raw inputs.
    pub fn validate(n: u64, m: u64, removals: &[i64]) -> Result<Self, SchemeError> {
        check_dims(n, m, removals.len())?;
        if let Some((position, &value)) = removals.iter().enumerate().find(|(_, &r)| r < 0) {
            return Err(SchemeError::NegativeRemoval { position, value });
        }
        let actual: u64 = removals.iter().map(|&r| r as u64).sum();
        if actual != n - m {
            return Err(SchemeError::SumMismatch {
                expected: n - m,
                actual,
            });
        }
        Ok(Scheme {
            n: n as u32,
            removals: removals.iter().map(|&r| r as u32).collect(),
        })
    }

    /// Build from unsigned removals; `n` is implied by `m + sum`.
    pub fn from_removals(removals: Vec<u32>) -> Result<Self, SchemeError> {
        let m = removals.len() as u64;
        let total: u64 = removals.iter().map(|&r| r as u64).sum();
        check_dims(m + total, m, removals.len())?;
        Ok(Scheme {
            n: (m + total) as u32,
            removals,
        })
    }

    /// Every removal is zero: a complete sample of size `m`.
    pub fn complete(m: u32) -> Self {
        assert!(m >= 1);
        Scheme {
            n: m,
            removals: vec![0; m as usize],
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.removals.len() as u32
    }

    pub fn removals(&self) -> &[u32] {
        &self.removals
    }

    /// Number of removed (censored) units, `n - m`.
    pub fn censored(&self) -> u32 {
        self.n - self.m()
    }

    /// Replace the removals at `positions` with `values`.
    ///
    /// Panics if the replacement changes the total.
    pub(crate) fn with_replaced(&self, positions: &[usize], values: &[u32]) -> Scheme {
        debug_assert_eq!(positions.len(), values.len());
        let mut removals = self.removals.clone();
        let before: u64 = positions.iter().map(|&p| removals[p] as u64).sum();
        let after: u64 = values.iter().map(|&v| v as u64).sum();
        assert_eq!(before, after, "replacement must preserve the sub-total");
        for (&p, &v) in positions.iter().zip(values) {
            removals[p] = v;
        }
        Scheme { n: self.n, removals }
    }

    /// Run-length display: `(0^5, 20, 0^4)`.
    pub fn run_length(&self) -> String {
        let mut parts = Vec::new();
        let mut iter = self.removals.iter().peekable();
        while let Some(&value) = iter.next() {
            let mut count = 1;
            while iter.peek() == Some(&&value) {
                iter.next();
                count += 1;
            }
            if count == 1 {
                parts.push(value.to_string());
            } else {
                parts.push(format!("{value}^{count}"));
            }
        }
        format!("({})", parts.join(", "))
    }
}

/// Comma-separated removals, e.g. `0,4,1,0,0`.
impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.removals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for Scheme {
    type Err = SchemeError;

    /// Accepts comma lists with optional parentheses, spaces and `a^b` runs.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut removals = Vec::new();
        for token in body.split(',') {
            let token = token.trim();
            let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| SchemeError::Parse(s.into()));
            match token.split_once('^') {
                Some((value, count)) => {
                    let value = parse(value)?;
                    let count = parse(count)?;
                    removals.extend(std::iter::repeat_n(value, count as usize));
                }
                None => removals.push(parse(token)?),
            }
        }
        Scheme::from_removals(removals)
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Scheme {
    type Error = SchemeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// `|CS(n, m)| = C(n - 1, m - 1)`, exact.
pub fn cardinality(n: u64, m: u64) -> Result<BigUint, SchemeError> {
    check_dims(n, m, m as usize)?;
    let top = n - 1;
    let k = (m - 1).min(top - (m - 1));
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= top - i;
        acc /= i + 1;
    }
    Ok(acc)
}

/// Lexicographically increasing iterator over compositions of `total` into
/// `parts` non-negative parts, optionally behind a fixed prefix.
#[derive(Debug, Clone)]
pub struct Compositions {
    n: u32,
    prefix_len: usize,
    current: Vec<u32>,
    done: bool,
}

impl Compositions {
    fn new(n: u32, prefix: Vec<u32>, parts: usize, total: u32) -> Self {
        let prefix_len = prefix.len();
        let mut current = prefix;
        if parts == 0 {
            return Compositions {
                n,
                prefix_len,
                current,
                done: total != 0,
            };
        }
        current.extend(std::iter::repeat_n(0, parts - 1));
        current.push(total);
        Compositions {
            n,
            prefix_len,
            current,
            done: false,
        }
    }

    fn advance(&mut self) {
        // Move one unit from the free tail to the rightmost free position
        // that still has mass to its right.
        let len = self.current.len();
        let mut tail = 0u32;
        for i in (self.prefix_len..len).rev() {
            if tail > 0 {
                self.current[i] += 1;
                for x in &mut self.current[i + 1..] {
                    *x = 0;
                }
                self.current[len - 1] = tail - 1;
                return;
            }
            tail += self.current[i];
        }
        self.done = true;
    }
}

impl Iterator for Compositions {
    type Item = Scheme;

    fn next(&mut self) -> Option<Scheme> {
        if self.done {
            return None;
        }
        let out = Scheme {
            n: self.n,
            removals: self.current.clone(),
        };
        self.advance();
        Some(out)
    }
}

/// Every scheme in CS(n, m), in increasing lexicographic order.
pub fn enumerate_schemes(n: u64, m: u64) -> Result<Compositions, SchemeError> {
    check_dims(n, m, m as usize)?;
    Ok(Compositions::new(n as u32, Vec::new(), m as usize, (n - m) as u32))
}

/// Split CS(n, m) into disjoint lexicographic chunks sharing a fixed prefix
/// of length `min(prefix_len, m - 1)`. Concatenating the chunks in order
/// reproduces [`enumerate_schemes`].
pub fn enumerate_chunks(n: u64, m: u64, prefix_len: usize) -> Result<Vec<Compositions>, SchemeError> {
    check_dims(n, m, m as usize)?;
    let prefix_len = prefix_len.min(m as usize - 1);
    let total = (n - m) as u32;
    let chunks = Compositions::new(n as u32, Vec::new(), prefix_len + 1, total)
        .map(|head| {
            // The last part of `head` is the mass left for the free suffix.
            let mut prefix = head.removals;
            prefix.pop();
            let used: u32 = prefix.iter().sum();
            Compositions::new(n as u32, prefix, m as usize - prefix_len, total - used)
        })
        .collect();
    Ok(chunks)
}
