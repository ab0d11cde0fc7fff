//! Exhaustive search over CS(n, m).

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{CriterionError, CriterionSpec, Evaluator, PrecisionPolicy, WeibullParams};
use crate::scheme::{cardinality, enumerate_chunks, Scheme, SchemeError};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("|CS(n, m)| = {cardinality} exceeds the budget of {budget} evaluations")]
    BudgetExceeded { cardinality: BigUint, budget: u64 },
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub budget: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub precision: PrecisionPolicy,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            budget: DEFAULT_BUDGET,
            workers: None,
            precision: PrecisionPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_scheme: Scheme,
    pub best_psi: f64,
    pub evaluated: u64,
    /// Evaluations that fell back to extended precision.
    pub extended_evaluations: u64,
}

#[derive(Debug, Clone)]
struct Partial {
    best: Option<(f64, Scheme)>,
    evaluated: u64,
    extended: u64,
}

impl Partial {
    fn empty() -> Self {
        Partial {
            best: None,
            evaluated: 0,
            extended: 0,
        }
    }

    /// Smaller ψ wins; equal ψ goes to the lexicographically smaller scheme.
    fn merge(self, other: Partial) -> Partial {
        let best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if (b.0, &b.1) < (a.0, &a.1) { b } else { a }),
            (a, b) => a.or(b),
        };
        Partial {
            best,
            evaluated: self.evaluated + other.evaluated,
            extended: self.extended + other.extended,
        }
    }
}

pub fn exhaustive_search(
    n: u32,
    m: u32,
    params: &WeibullParams,
    criterion: &CriterionSpec,
) -> Result<OracleResult, OracleError> {
    exhaustive_search_with(n, m, params, criterion, &OracleConfig::default())
}

pub fn exhaustive_search_with(
    n: u32,
    m: u32,
    params: &WeibullParams,
    criterion: &CriterionSpec,
    config: &OracleConfig,
) -> Result<OracleResult, OracleError> {
    let size = cardinality(n as u64, m as u64)?;
    if size > BigUint::from(config.budget) {
        return Err(OracleError::BudgetExceeded {
            cardinality: size,
            budget: config.budget,
        });
    }
    let evaluator = Evaluator::uncached(*params, *criterion).with_policy(config.precision);
    let run = || {
        let threads = rayon::current_num_threads();
        let chunks = split(n, m, threads * 8)?;
        let partial = chunks
            .into_par_iter()
            .map(|chunk| {
                let mut acc = Partial::empty();
                for scheme in chunk {
                    let e = evaluator.evaluate(&scheme)?;
                    acc.evaluated += 1;
                    acc.extended += e.extended as u64;
                    // Chunks are lexicographic, so strict `<` keeps the first tie.
                    if acc.best.as_ref().is_none_or(|(psi, _)| e.value < *psi) {
                        acc.best = Some((e.value, scheme));
                    }
                }
                Ok::<_, OracleError>(acc)
            })
            .try_reduce(Partial::empty, |a, b| Ok(a.merge(b)))?;
        Ok::<_, OracleError>(partial)
    };
    let partial = match config.workers {
        Some(0) => return Err(OracleError::NoWorkers),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(run)?,
        None => run()?,
    };
    let (best_psi, best_scheme) = partial.best.expect("CS(n, m) is non-empty");
    Ok(OracleResult {
        best_scheme,
        best_psi,
        evaluated: partial.evaluated,
        extended_evaluations: partial.extended,
    })
}

/// Prefix chunks, lengthening the prefix until there are at least `target`.
fn split(n: u32, m: u32, target: usize) -> Result<Vec<crate::scheme::Compositions>, OracleError> {
    let mut prefix = 1;
    loop {
        let chunks = enumerate_chunks(n as u64, m as u64, prefix)?;
        if chunks.len() >= target || prefix + 1 >= m as usize {
            return Ok(chunks);
        }
        prefix += 1;
    }
}
