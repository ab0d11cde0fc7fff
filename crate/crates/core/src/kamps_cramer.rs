//! Kamps–Cramer coefficients of a progressively censored sample and the
//! weighted sums built from them.
//!
//! With `γ_r = m - r + 1 + Σ_{i>=r} R_i`, the transformed failure times
//! `Z_i = -ln S(X_{i:m:n})` are sums of independent `Exp(γ_1), ..., Exp(γ_i)`
//! variables, and the law of `Z_i` is the signed mixture
//! `σ_{i-1} Σ_{p<=i} a_{p,i} e^{-γ_p z}`. Every expectation the criteria need
//! reduces to `Σ_i Σ_{j<=i} w_{ij} h(γ_j)` with `w_{ij} = σ_{i-1} a_{j,i} / γ_j`.

use crate::scalar::{ExtFloat, Real};
use crate::scheme::Scheme;

/// `γ`, `σ` and the lower-triangular `a` of a scheme, in scalar type `S`.
///
/// `sigma[r]` holds `σ_r = γ_1 ⋯ γ_{r+1}`; it overflows `f64` once `n` passes
/// about 170, which is why the criteria use [`mixture_weights`] instead.
#[derive(Debug, Clone)]
pub struct KampsCramerCoeffs<S> {
    pub gamma: Vec<u64>,
    pub sigma: Vec<S>,
    /// `a[r][i]` is `a_{i+1, r+1}` for `i <= r`.
    pub a: Vec<Vec<S>>,
}

/// `γ_1, ..., γ_m`; strictly decreasing with `γ_r - γ_{r+1} = 1 + R_r`.
pub fn gammas(scheme: &Scheme) -> Vec<u64> {
    let m = scheme.m() as usize;
    let mut out = vec![0u64; m];
    let mut tail = 0u64;
    for r in (0..m).rev() {
        tail += scheme.removals()[r] as u64 + 1;
        out[r] = tail;
    }
    out
}

impl<S: Real> KampsCramerCoeffs<S> {
    pub fn new(scheme: &Scheme, bits: usize) -> Self {
        let gamma = gammas(scheme);
        let g: Vec<S> = gamma.iter().map(|&x| S::from_u64(x, bits)).collect();
        let m = gamma.len();
        let mut sigma = Vec::with_capacity(m);
        let mut acc = S::one(bits);
        for gi in &g {
            acc = acc * gi.clone();
            sigma.push(acc.clone());
        }
        let a = (0..m)
            .map(|r| {
                (0..=r)
                    .map(|i| {
                        let mut prod = S::one(bits);
                        for j in 0..=r {
                            if j != i {
                                // γ are integers, so the differences are exact.
                                let diff = gamma[j] as i64 - gamma[i] as i64;
                                let d = S::from_u64(diff.unsigned_abs(), bits);
                                prod = if diff < 0 { prod / -d } else { prod / d };
                            }
                        }
                        prod
                    })
                    .collect()
            })
            .collect();
        KampsCramerCoeffs { gamma, sigma, a }
    }
}

/// Mixture weights `w[i][j] = σ_{i} a_{j,i} / γ_j` (zero-based), computed as
/// products of ratios `γ_l / (γ_l - γ_j)` so no factorial-sized
/// intermediate appears. Row `i` sums to one.
pub fn mixture_weights<S: Real>(gamma: &[u64], bits: usize) -> Vec<Vec<S>> {
    let m = gamma.len();
    let ratio = |l: usize, j: usize| {
        let num = S::from_u64(gamma[l], bits);
        let diff = gamma[l] as i64 - gamma[j] as i64;
        let den = S::from_u64(diff.unsigned_abs(), bits);
        if diff < 0 {
            -(num / den)
        } else {
            num / den
        }
    };
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..i {
            row.push(rows[i - 1][j].clone() * ratio(i, j));
        }
        let mut diag = S::one(bits);
        for l in 0..i {
            diag = diag * ratio(l, i);
        }
        row.push(diag);
        rows.push(row);
    }
    rows
}

/// The three sums behind the Fisher information, with `L_j = ln γ_j`:
/// `t0 = Σ w_ij`, `t1 = Σ w_ij L_j`, `t2 = Σ w_ij L_j²` (over `1 <= j <= i <= m`),
/// plus the matching sums of absolute values, which bound the rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMoments {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub abs0: f64,
    pub abs1: f64,
    pub abs2: f64,
}

pub fn log_moments<S: Real>(gamma: &[u64], bits: usize) -> LogMoments {
    let w = mixture_weights::<S>(gamma, bits);
    let m = gamma.len();
    // Column sums first: W_j = Σ_{i>=j} w_ij.
    let mut t = [S::zero(bits), S::zero(bits), S::zero(bits)];
    let mut abs = [0.0f64; 3];
    for j in 0..m {
        let lj = S::from_u64(gamma[j], bits).ln();
        let lj2 = lj.clone() * lj.clone();
        let lj_f = lj.to_f64().abs();
        let mut col = S::zero(bits);
        let mut col_abs = 0.0;
        for row in w.iter().skip(j) {
            col = col + row[j].clone();
            col_abs += row[j].to_f64().abs();
        }
        t[0] = t[0].clone() + col.clone();
        t[1] = t[1].clone() + col.clone() * lj;
        t[2] = t[2].clone() + col * lj2;
        abs[0] += col_abs;
        abs[1] += col_abs * lj_f;
        abs[2] += col_abs * lj_f * lj_f;
    }
    LogMoments {
        t0: t[0].to_f64(),
        t1: t[1].to_f64(),
        t2: t[2].to_f64(),
        abs0: abs[0],
        abs1: abs[1],
        abs2: abs[2],
    }
}

/// `Σ_j w_{mj} γ_j^{-e}` over the last row, and its absolute-value sum.
pub fn last_row_power_sum<S: Real>(gamma: &[u64], exponent: f64, bits: usize) -> (f64, f64) {
    let w = mixture_weights::<S>(gamma, bits);
    let last = w.last().expect("m >= 1");
    let neg_e = S::from_f64(-exponent, bits);
    let mut sum = S::zero(bits);
    let mut abs = 0.0;
    for (j, wj) in last.iter().enumerate() {
        let term = wj.clone() * (neg_e.clone() * S::from_u64(gamma[j], bits).ln()).exp();
        abs += term.to_f64().abs();
        sum = sum + term;
    }
    (sum.to_f64(), abs)
}

/// Coefficients in `f64`.
pub fn kamps_cramer(scheme: &Scheme) -> KampsCramerCoeffs<f64> {
    KampsCramerCoeffs::new(scheme, 53)
}

/// Coefficients at `bits` of working precision.
pub fn kamps_cramer_ext(scheme: &Scheme, bits: usize) -> KampsCramerCoeffs<ExtFloat> {
    KampsCramerCoeffs::new(scheme, bits)
}
