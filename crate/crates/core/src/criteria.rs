//! Weibull optimality criteria for a censoring scheme.
//!
//! Lifetimes follow `F(x) = 1 - exp(-(k x)^β)`. Two criteria are supported:
//! the integrated asymptotic variance of `ln X̂_s` over `s ∈ (0, 1)`, and the
//! linear test cost `C_o + C_f m + C_t E[X_{m:m:n}]`. Both are minimized.

use std::f64::consts::PI;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kamps_cramer::{gammas, last_row_power_sum, log_moments, LogMoments};
use crate::scalar::ExtFloat;
use crate::scheme::Scheme;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `∫_0^1 ln(-ln(1-s)) ds`.
pub const G_INTEGRAL: f64 = -EULER_GAMMA;

/// `∫_0^1 ln(-ln(1-s))^2 ds`.
pub const G_SQUARED_INTEGRAL: f64 = EULER_GAMMA * EULER_GAMMA + PI * PI / 6.0;

/// Smallest accepted shape parameter.
pub const MIN_SHAPE: f64 = 0.05;

/// Default condition-number threshold above which the `f64` sums are
/// replaced by the extended-precision path.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("invalid Weibull parameters: beta = {beta}, k = {k}")]
    InvalidParams { beta: f64, k: f64 },
    #[error("invalid cost coefficients: {0:?}")]
    InvalidCosts(CostCoefficients),
    #[error("alternating sums lost precision (condition number {condition:.3e})")]
    PrecisionLoss { condition: f64 },
    #[error("Fisher information is singular (det = {det:e})")]
    SingularInformation { det: f64 },
}

/// Shape `beta` and scale `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    beta: f64,
    k: f64,
}

impl WeibullParams {
    pub fn new(beta: f64, k: f64) -> Result<Self, CriterionError> {
        if !(beta.is_finite() && k.is_finite() && beta >= MIN_SHAPE && k > 0.0) {
            return Err(CriterionError::InvalidParams { beta, k });
        }
        Ok(WeibullParams { beta, k })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Same shape, scale multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self, CriterionError> {
        WeibullParams::new(self.beta, self.k * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    pub c_o: f64,
    pub c_f: f64,
    pub c_t: f64,
}

impl CostCoefficients {
    pub fn new(c_o: f64, c_f: f64, c_t: f64) -> Result<Self, CriterionError> {
        let c = CostCoefficients { c_o, c_f, c_t };
        if [c_o, c_f, c_t].iter().all(|x| x.is_finite() && *x >= 0.0) {
            Ok(c)
        } else {
            Err(CriterionError::InvalidCosts(c))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionSpec {
    IntegratedLogQuantileVariance,
    Cost(CostCoefficients),
}

/// Symmetric 2×2 Fisher information about `(β, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub i11: f64,
    pub i12: f64,
    pub i22: f64,
}

impl FisherInfo {
    pub fn det(&self) -> f64 {
        self.i11 * self.i22 - self.i12 * self.i12
    }

    /// Entries `(I^11, I^12, I^22)` of the inverse.
    pub fn inverse(&self) -> Result<(f64, f64, f64), CriterionError> {
        let det = self.det();
        // Relative test: det is a difference of two O(i11 i22) products.
        if !(det > 1e-14 * self.i11 * self.i22) || !det.is_finite() {
            return Err(CriterionError::SingularInformation { det });
        }
        Ok((self.i22 / det, -self.i12 / det, self.i11 / det))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.i11 > 0.0 && self.i22 > 0.0 && self.det() > 0.0
    }
}

/// How to react when the `f64` sums are ill-conditioned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionPolicy {
    /// Fail with [`CriterionError::PrecisionLoss`].
    Strict { condition_limit: f64 },
    /// Recompute in extended precision.
    Auto { condition_limit: f64 },
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy::Auto {
            condition_limit: DEFAULT_CONDITION_LIMIT,
        }
    }
}

impl PrecisionPolicy {
    fn limit(&self) -> f64 {
        match *self {
            PrecisionPolicy::Strict { condition_limit } | PrecisionPolicy::Auto { condition_limit } => condition_limit,
        }
    }
}

/// A value plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated<T> {
    pub value: T,
    /// Condition number of the `f64` evaluation.
    pub condition: f64,
    /// Whether the extended-precision path produced `value`.
    pub extended: bool,
}

const A11: f64 = (1.0 - EULER_GAMMA) * (1.0 - EULER_GAMMA) + PI * PI / 6.0;
const B1: f64 = 1.0 - EULER_GAMMA;

// In terms of the log moments, the per-term inner integrals are
//   ∫(1 + ln(z/γ))² e^{-z} dz = A11 - 2 B1 ln γ + ln² γ,
//   ∫(1 + ln(z/γ))  e^{-z} dz = B1 - ln γ.
fn unit_fisher(t: &LogMoments) -> (f64, f64, f64) {
    (A11 * t.t0 - 2.0 * B1 * t.t1 + t.t2, B1 * t.t0 - t.t1, t.t0)
}

fn fisher_condition(t: &LogMoments) -> f64 {
    let (u11, _, u22) = unit_fisher(t);
    let err11 = A11 * t.abs0 + 2.0 * B1 * t.abs1 + t.abs2;
    let err12 = B1 * t.abs0 + t.abs1;
    let err22 = t.abs0;
    let scale12 = (u11.abs() * u22.abs()).sqrt();
    (err11 / u11.abs()).max(err12 / scale12).max(err22 / u22.abs())
}

fn working_bits(condition: f64) -> usize {
    let digits = if condition.is_finite() && condition > 1.0 { condition.log2().ceil() as usize } else { 64 };
    128 + digits
}

/// Log moments for `scheme`, escalating precision as the policy allows.
fn moments(scheme: &Scheme, policy: PrecisionPolicy) -> Result<Evaluated<LogMoments>, CriterionError> {
    let g = gammas(scheme);
    let fast = log_moments::<f64>(&g, 53);
    let condition = fisher_condition(&fast);
    if condition.is_finite() && condition <= policy.limit() {
        return Ok(Evaluated {
            value: fast,
            condition,
            extended: false,
        });
    }
    if let PrecisionPolicy::Strict { .. } = policy {
        return Err(CriterionError::PrecisionLoss { condition });
    }
    let mut bits = working_bits(condition);
    loop {
        let ext = log_moments::<ExtFloat>(&g, bits);
        // The fast denominator may itself be garbage; recheck with the accurate one.
        let true_condition = fisher_condition(&LogMoments {
            abs0: fast.abs0,
            abs1: fast.abs1,
            abs2: fast.abs2,
            ..ext
        });
        let needed = working_bits(true_condition);
        if needed <= bits {
            return Ok(Evaluated {
                value: ext,
                condition,
                extended: true,
            });
        }
        bits = needed;
    }
}

/// Fisher information of the censored sample about `(β, k)`.
pub fn fisher_information_with(
    scheme: &Scheme,
    params: &WeibullParams,
    policy: PrecisionPolicy,
) -> Result<Evaluated<FisherInfo>, CriterionError> {
    let t = moments(scheme, policy)?;
    let (u11, u12, u22) = unit_fisher(&t.value);
    let (beta, k) = (params.beta, params.k);
    let info = FisherInfo {
        i11: u11 / (beta * beta),
        i12: u12 / k,
        i22: (beta / k) * (beta / k) * u22,
    };
    Ok(Evaluated {
        value: info,
        condition: t.condition,
        extended: t.extended,
    })
}

pub fn fisher_information(scheme: &Scheme, params: &WeibullParams) -> Result<FisherInfo, CriterionError> {
    fisher_information_with(scheme, params, PrecisionPolicy::default()).map(|e| e.value)
}

/// Delta-method `Var[ln X̂_s]` at the quantile with `g(s) = ln(-ln(1-s))`.
pub fn log_quantile_variance(info: &FisherInfo, params: &WeibullParams, g: f64) -> Result<f64, CriterionError> {
    let (v11, v12, v22) = info.inverse()?;
    let (beta, k) = (params.beta, params.k);
    Ok(v11 / beta.powi(4) * g * g + 2.0 * v12 / (beta * beta * k) * g + v22 / (k * k))
}

/// `∫_0^1 Var[ln X̂_s] ds` from the inverse Fisher information.
pub fn integrated_variance(info: &FisherInfo, params: &WeibullParams) -> Result<f64, CriterionError> {
    let (v11, v12, v22) = info.inverse()?;
    let (beta, k) = (params.beta, params.k);
    Ok(v11 / beta.powi(4) * G_SQUARED_INTEGRAL + 2.0 * v12 / (beta * beta * k) * G_INTEGRAL + v22 / (k * k))
}

pub fn variance_criterion_with(
    scheme: &Scheme,
    params: &WeibullParams,
    policy: PrecisionPolicy,
) -> Result<Evaluated<f64>, CriterionError> {
    let info = fisher_information_with(scheme, params, policy)?;
    let value = integrated_variance(&info.value, params)?;
    Ok(Evaluated {
        value,
        condition: info.condition,
        extended: info.extended,
    })
}

pub fn variance_criterion(scheme: &Scheme, params: &WeibullParams) -> Result<f64, CriterionError> {
    variance_criterion_with(scheme, params, PrecisionPolicy::default()).map(|e| e.value)
}

/// `E[X_{m:m:n}] = Γ(1 + 1/β)/k · Σ_p w_{mp} γ_p^{-1/β}`.
pub fn expected_final_failure_time_with(
    scheme: &Scheme,
    params: &WeibullParams,
    policy: PrecisionPolicy,
) -> Result<Evaluated<f64>, CriterionError> {
    let g = gammas(scheme);
    let exponent = 1.0 / params.beta;
    let prefactor = statrs::function::gamma::gamma(1.0 + exponent) / params.k;
    let (sum, abs) = last_row_power_sum::<f64>(&g, exponent, 53);
    let condition = abs / sum.abs();
    if condition.is_finite() && condition <= policy.limit() {
        return Ok(Evaluated {
            value: prefactor * sum,
            condition,
            extended: false,
        });
    }
    if let PrecisionPolicy::Strict { .. } = policy {
        return Err(CriterionError::PrecisionLoss { condition });
    }
    let mut bits = working_bits(condition);
    loop {
        let (ext, _) = last_row_power_sum::<ExtFloat>(&g, exponent, bits);
        let needed = working_bits(abs / ext.abs());
        if needed <= bits {
            return Ok(Evaluated {
                value: prefactor * ext,
                condition,
                extended: true,
            });
        }
        bits = needed;
    }
}

pub fn expected_final_failure_time(scheme: &Scheme, params: &WeibullParams) -> Result<f64, CriterionError> {
    expected_final_failure_time_with(scheme, params, PrecisionPolicy::default()).map(|e| e.value)
}

pub fn cost_criterion(
    scheme: &Scheme,
    params: &WeibullParams,
    costs: &CostCoefficients,
) -> Result<f64, CriterionError> {
    let duration = if costs.c_t == 0.0 { 0.0 } else { expected_final_failure_time(scheme, params)? };
    Ok(costs.c_o + costs.c_f * scheme.m() as f64 + costs.c_t * duration)
}

/// Monotone transform `e^{-ψ}` that plays the role of the target.
pub fn criterion_transform(psi: f64) -> f64 {
    debug_assert!(psi >= 0.0);
    (-psi).exp()
}

/// Evaluates ψ for one `(params, spec)` pair, memoizing per scheme.
///
/// Safe to share across threads; concurrent misses on the same scheme may
/// both compute, and the stored value is the same either way.
#[derive(Debug)]
pub struct Evaluator {
    params: WeibullParams,
    spec: CriterionSpec,
    policy: PrecisionPolicy,
    cache: Option<DashMap<Scheme, Evaluated<f64>>>,
}

impl Evaluator {
    pub fn new(params: WeibullParams, spec: CriterionSpec) -> Self {
        Evaluator {
            params,
            spec,
            policy: PrecisionPolicy::default(),
            cache: Some(DashMap::new()),
        }
    }

    /// No memoization; for single-pass sweeps like exhaustive search.
    pub fn uncached(params: WeibullParams, spec: CriterionSpec) -> Self {
        Evaluator {
            cache: None,
            ..Evaluator::new(params, spec)
        }
    }

    pub fn with_policy(mut self, policy: PrecisionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn params(&self) -> &WeibullParams {
        &self.params
    }

    pub fn spec(&self) -> &CriterionSpec {
        &self.spec
    }

    fn compute(&self, scheme: &Scheme) -> Result<Evaluated<f64>, CriterionError> {
        match &self.spec {
            CriterionSpec::IntegratedLogQuantileVariance => variance_criterion_with(scheme, &self.params, self.policy),
            CriterionSpec::Cost(costs) => {
                let fixed = costs.c_o + costs.c_f * scheme.m() as f64;
                if costs.c_t == 0.0 {
                    return Ok(Evaluated {
                        value: fixed,
                        condition: 1.0,
                        extended: false,
                    });
                }
                let e = expected_final_failure_time_with(scheme, &self.params, self.policy)?;
                Ok(Evaluated {
                    value: fixed + costs.c_t * e.value,
                    ..e
                })
            }
        }
    }

    pub fn evaluate(&self, scheme: &Scheme) -> Result<Evaluated<f64>, CriterionError> {
        let Some(cache) = &self.cache else {
            return self.compute(scheme);
        };
        if let Some(hit) = cache.get(scheme) {
            return Ok(*hit);
        }
        let value = self.compute(scheme)?;
        cache.insert(scheme.clone(), value);
        Ok(value)
    }

    pub fn psi(&self, scheme: &Scheme) -> Result<f64, CriterionError> {
        self.evaluate(scheme).map(|e| e.value)
    }

    /// Number of memoized schemes that needed extended precision.
    pub fn extended_count(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.iter().filter(|e| e.extended).count())
    }

    pub fn cached_len(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.len())
    }
}
