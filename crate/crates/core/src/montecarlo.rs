//! Simulation of progressively censored Weibull samples, maximum likelihood
//! fitting, and empirical checks of the closed-form moments.
//!
//! Lifetimes follow `S(x) = exp(-(k x)^β)`. Replication `r` of a seeded
//! experiment draws from stream `r` of `ChaCha8Rng::seed_from_u64(seed)`, so
//! results do not depend on the thread count.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{fisher_information, log_quantile_variance, CriterionError, WeibullParams};
use crate::kamps_cramer::gammas;
use crate::numfmt::sig17;
use crate::scheme::Scheme;

pub const MAX_NEWTON_ITERATIONS: u32 = 200;
pub const PROFILE_TOLERANCE: f64 = 1e-10;
pub const MIN_REPLICATIONS: usize = 1000;
/// Largest tolerated share of non-converged fits.
pub const MAX_EXCLUSION_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("maximum likelihood fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: u32 },
    #[error("{excluded} of {replications} fits did not converge")]
    NoConvergenceRate { excluded: usize, replications: usize },
    #[error("need at least {MIN_REPLICATIONS} replications, got {0}")]
    TooFewReplications(usize),
    #[error("quantile level must lie in (0, 1), got {0}")]
    BadQuantile(f64),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    pub times: Vec<f64>,
    pub scheme: Scheme,
}

/// Draw `X_{1:m:n} < ... < X_{m:m:n}` by exponential spacings: the
/// increments of `-ln S(X_{i:m:n})` are independent `Exp(γ_i)`.
pub fn simulate_sample<R: Rng + ?Sized>(scheme: &Scheme, params: &WeibullParams, rng: &mut R) -> CensoredSample {
    let inv_beta = 1.0 / params.beta();
    let mut cumulative = 0.0;
    let times = gammas(scheme)
        .into_iter()
        .map(|g| {
            let z: f64 = Exp1.sample(rng);
            cumulative += z / g as f64;
            cumulative.powf(inv_beta) / params.k()
        })
        .collect();
    CensoredSample {
        times,
        scheme: scheme.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub beta_hat: f64,
    pub k_hat: f64,
    pub converged: bool,
    pub iterations: u32,
}

impl MleEstimate {
    pub fn require_converged(self) -> Result<Self, MonteCarloError> {
        if self.converged {
            Ok(self)
        } else {
            Err(MonteCarloError::NoConvergence {
                iterations: self.iterations,
            })
        }
    }

    /// Plug-in quantile `(1/k̂)(-ln(1-s))^{1/β̂}`.
    pub fn quantile(&self, s: f64) -> f64 {
        (-(-s).ln_1p()).powf(1.0 / self.beta_hat) / self.k_hat
    }
}

/// Profile score in β per observation, with logs centered at their maximum:
/// `h(β) = 1/β + mean(y) - Σ c_i y_i e^{β y_i} / Σ c_i e^{β y_i}`, and `h'(β)`.
struct Profile {
    y: Vec<f64>,
    c: Vec<f64>,
    mean_y: f64,
}

impl Profile {
    fn eval(&self, beta: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&y, &c) in self.y.iter().zip(&self.c) {
            let w = c * (beta * y).exp();
            s0 += w;
            s1 += w * y;
            s2 += w * y * y;
        }
        let mean = s1 / s0;
        let var = (s2 / s0 - mean * mean).max(0.0);
        (1.0 / beta + self.mean_y - mean, -1.0 / (beta * beta) - var)
    }

    /// `ln Σ c_i x_i^β` given the centering shift.
    fn log_weighted_power_sum(&self, beta: f64, shift: f64) -> f64 {
        let s: f64 = self.y.iter().zip(&self.c).map(|(&y, &c)| c * (beta * y).exp()).sum();
        s.ln() + beta * shift
    }
}

/// Maximize the censored Weibull likelihood `Π f(x_i) S(x_i)^{R_i}`.
///
/// The profile score in β is strictly decreasing, so Newton steps are kept
/// inside a bracket and replaced by bisection when they leave it. `k̂` then
/// solves `k^β Σ (1 + R_i) x_i^β = m`.
pub fn fit_mle(sample: &CensoredSample) -> MleEstimate {
    let m = sample.times.len();
    let logs: Vec<f64> = sample.times.iter().map(|t| t.ln()).collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let profile = Profile {
        y: logs.iter().map(|l| l - shift).collect(),
        c: sample.scheme.removals().iter().map(|&r| 1.0 + r as f64).collect(),
        mean_y: logs.iter().map(|l| l - shift).sum::<f64>() / m as f64,
    };
    let failed = |iterations| MleEstimate {
        beta_hat: f64::NAN,
        k_hat: f64::NAN,
        converged: false,
        iterations,
    };

    // Bracket the root: h(lo) > 0 > h(hi).
    let (mut lo, mut hi) = (0.5, 2.0);
    let mut iterations = 0;
    while profile.eval(lo).0 <= 0.0 {
        lo /= 4.0;
        iterations += 1;
        if iterations >= MAX_NEWTON_ITERATIONS || lo < 1e-12 {
            return failed(iterations);
        }
    }
    while profile.eval(hi).0 >= 0.0 {
        hi *= 4.0;
        iterations += 1;
        if iterations >= MAX_NEWTON_ITERATIONS || hi > 1e12 {
            return failed(iterations);
        }
    }

    let mut beta = 0.5 * (lo + hi);
    while iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let (h, dh) = profile.eval(beta);
        if h.abs() <= PROFILE_TOLERANCE {
            let log_k = ((m as f64).ln() - profile.log_weighted_power_sum(beta, shift)) / beta;
            return MleEstimate {
                beta_hat: beta,
                k_hat: log_k.exp(),
                converged: true,
                iterations,
            };
        }
        if h > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - h / dh;
        beta = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    failed(iterations)
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

/// Sample mean and standard error of `X_{m:m:n}`.
pub fn simulate_final_time_mean(scheme: &Scheme, params: &WeibullParams, replications: usize, seed: u64) -> MeanEstimate {
    assert!(replications >= 2);
    let (sum, sum_sq) = (0..replications)
        .into_par_iter()
        .map(|r| {
            let sample = simulate_sample(scheme, params, &mut replication_rng(seed, r));
            let x = *sample.times.last().expect("m >= 1");
            (x, x * x)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = replications as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    MeanEstimate {
        mean,
        std_error: (var.max(0.0) / n).sqrt(),
        replications,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub s: f64,
    pub empirical: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    /// Replications that entered the estimate.
    pub replications: usize,
    pub excluded: usize,
}

/// Compare the empirical variance of `ln X̂_s` over simulated fits with the
/// delta-method value from the Fisher information, for each `s` in `s_grid`.
pub fn empirical_variance_check(
    scheme: &Scheme,
    params: &WeibullParams,
    s_grid: &[f64],
    replications: usize,
    seed: u64,
) -> Result<Vec<VarianceRow>, MonteCarloError> {
    if replications < MIN_REPLICATIONS {
        return Err(MonteCarloError::TooFewReplications(replications));
    }
    if let Some(&s) = s_grid.iter().find(|&&s| !(s > 0.0 && s < 1.0)) {
        return Err(MonteCarloError::BadQuantile(s));
    }
    let info = fisher_information(scheme, params)?;
    let fits: Vec<MleEstimate> = (0..replications)
        .into_par_iter()
        .map(|r| fit_mle(&simulate_sample(scheme, params, &mut replication_rng(seed, r))))
        .collect();
    let good: Vec<&MleEstimate> = fits.iter().filter(|f| f.converged).collect();
    let excluded = replications - good.len();
    if excluded as f64 >= MAX_EXCLUSION_RATE * replications as f64 {
        return Err(MonteCarloError::NoConvergenceRate { excluded, replications });
    }
    s_grid
        .iter()
        .map(|&s| {
            let logs: Vec<f64> = good.iter().map(|f| f.quantile(s).ln()).collect();
            let n = logs.len() as f64;
            let mean = logs.iter().sum::<f64>() / n;
            let empirical = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let g = (-(-s).ln_1p()).ln();
            let asymptotic = log_quantile_variance(&info, params, g)?;
            Ok(VarianceRow {
                s,
                empirical,
                asymptotic,
                ratio: empirical / asymptotic,
                replications: good.len(),
                excluded,
            })
        })
        .collect()
}

pub const VARIANCE_HEADER: [&str; 6] = ["s", "empirical", "asymptotic", "ratio", "replications", "excluded"];

pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VARIANCE_HEADER)?;
    for r in rows {
        w.write_record([
            sig17(r.s),
            sig17(r.empirical),
            sig17(r.asymptotic),
            sig17(r.ratio),
            r.replications.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    w.flush()
}
