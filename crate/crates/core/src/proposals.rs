//! Proposal distributions over CS(n, m): multinomial, sequential uniform and
//! multivariate hypergeometric.
//!
//! Each kind provides an initial draw, an update that resamples some
//! positions of the current scheme while keeping their sub-total, and the
//! log proposal density used in the acceptance ratio.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use thiserror::Error;

use crate::scheme::Scheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposalError {
    #[error("removal {value} at position {position} exceeds its cell size {cell}")]
    UnsupportedValue { position: usize, value: u32, cell: u64 },
    #[error("cell probabilities must be positive and sum to one: {0:?}")]
    InvalidProbabilities(Vec<f64>),
    #[error("unknown proposal kind `{0}`")]
    UnknownKind(String),
    #[error("m1 = {m1} outside 1..={m}")]
    BadUpdateSize { m1: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Multinomial,
    UniformSequential,
    MultivariateHypergeometric,
}

impl ProposalKind {
    pub const ALL: [ProposalKind; 3] = [
        ProposalKind::Multinomial,
        ProposalKind::UniformSequential,
        ProposalKind::MultivariateHypergeometric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProposalKind::Multinomial => "multinomial",
            ProposalKind::UniformSequential => "uniform",
            ProposalKind::MultivariateHypergeometric => "mvhg",
        }
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProposalKind {
    type Err = ProposalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multinomial" => Ok(ProposalKind::Multinomial),
            "uniform" => Ok(ProposalKind::UniformSequential),
            "mvhg" => Ok(ProposalKind::MultivariateHypergeometric),
            other => Err(ProposalError::UnknownKind(other.into())),
        }
    }
}

/// How many positions an update resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M1Policy {
    /// `m1` uniform on `1..=m` at every step.
    #[default]
    Uniform,
    Fixed(usize),
}

impl M1Policy {
    pub fn check(&self, m: usize) -> Result<(), ProposalError> {
        match *self {
            M1Policy::Fixed(m1) if m1 == 0 || m1 > m => Err(ProposalError::BadUpdateSize { m1, m }),
            _ => Ok(()),
        }
    }
}

/// Cell probabilities of the multinomial proposal, fixed for a whole chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialState {
    p: Vec<f64>,
}

impl MultinomialState {
    pub fn new(p: Vec<f64>) -> Result<Self, ProposalError> {
        let sum: f64 = p.iter().sum();
        if p.is_empty() || p.iter().any(|&x| !(x > 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(ProposalError::InvalidProbabilities(p));
        }
        Ok(MultinomialState { p })
    }

    /// Normalize `m` draws from `U(0, 1]`.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let u: Vec<f64> = (0..m).map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = u.iter().sum();
        MultinomialState {
            p: u.into_iter().map(|x| x / total).collect(),
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

/// Zero-based positions resampled by one update, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateSelection {
    positions: Vec<usize>,
}

impl UpdateSelection {
    pub fn new(mut positions: Vec<usize>, m: usize) -> Result<Self, ProposalError> {
        positions.sort_unstable();
        positions.dedup();
        if positions.is_empty() || positions.iter().any(|&p| p >= m) {
            return Err(ProposalError::BadUpdateSize { m1: positions.len(), m });
        }
        Ok(UpdateSelection { positions })
    }

    pub fn random<R: Rng + ?Sized>(m: usize, policy: M1Policy, rng: &mut R) -> Self {
        let m1 = match policy {
            M1Policy::Uniform => rng.random_range(1..=m),
            M1Policy::Fixed(m1) => m1,
        };
        Self::of_size(m, m1, rng)
    }

    pub fn of_size<R: Rng + ?Sized>(m: usize, m1: usize, rng: &mut R) -> Self {
        assert!(m1 >= 1 && m1 <= m, "m1 = {m1} outside 1..={m}");
        let mut positions = rand::seq::index::sample(rng, m, m1).into_vec();
        positions.sort_unstable();
        UpdateSelection { positions }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }
}

/// Sequential-binomial draw from `Multinomial(total; probs)`.
pub fn multinomial_draw<R: Rng + ?Sized>(total: u32, probs: &[f64], rng: &mut R) -> Vec<u32> {
    let mut out = vec![0u32; probs.len()];
    let mut remaining = total as u64;
    let mut mass: f64 = probs.iter().sum();
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate().take(last) {
        if remaining == 0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let x = Binomial::new(remaining, q).expect("q in [0, 1]").sample(rng);
        out[i] = x as u32;
        remaining -= x;
        mass -= p;
    }
    out[last] = remaining as u32;
    out
}

/// Sequential draw from the multivariate hypergeometric law with cell sizes
/// `cells` and `draws` items in total.
pub fn mvhg_draw<R: Rng + ?Sized>(cells: &[u64], draws: u64, rng: &mut R) -> Vec<u32> {
    let mut out = vec![0u32; cells.len()];
    let mut population: u64 = cells.iter().sum();
    let mut remaining = draws;
    assert!(draws <= population);
    let last = cells.len() - 1;
    for (i, &cell) in cells.iter().enumerate().take(last) {
        if remaining == 0 {
            break;
        }
        let x = Hypergeometric::new(population, cell, remaining)
            .expect("valid hypergeometric parameters")
            .sample(rng);
        out[i] = x as u32;
        remaining -= x;
        population -= cell;
    }
    out[last] = remaining as u32;
    out
}

pub fn multinomial_init<R: Rng + ?Sized>(n: u32, m: u32, rng: &mut R) -> (Scheme, MultinomialState) {
    let state = MultinomialState::random(m as usize, rng);
    let removals = multinomial_draw(n - m, &state.p, rng);
    (Scheme::from_removals(removals).expect("sums to n - m"), state)
}

/// Resample `selection` from `Multinomial(Σ R'_j; q)` with `q` the
/// renormalized cell probabilities at those positions.
pub fn multinomial_update_at<R: Rng + ?Sized>(
    old: &Scheme,
    state: &MultinomialState,
    selection: &UpdateSelection,
    rng: &mut R,
) -> Scheme {
    let pos = selection.positions();
    let subtotal: u32 = pos.iter().map(|&i| old.removals()[i]).sum();
    let q: Vec<f64> = pos.iter().map(|&i| state.p[i]).collect();
    let values = multinomial_draw(subtotal, &q, rng);
    old.with_replaced(pos, &values)
}

pub fn multinomial_update<R: Rng + ?Sized>(old: &Scheme, state: &MultinomialState, m1: usize, rng: &mut R) -> Scheme {
    let selection = UpdateSelection::of_size(old.m() as usize, m1, rng);
    multinomial_update_at(old, state, &selection, rng)
}

/// `ln[(n-m)! / Π R_i! · Π p_i^{R_i}]`.
pub fn multinomial_log_density(scheme: &Scheme, state: &MultinomialState) -> f64 {
    let mut acc = ln_factorial(scheme.censored() as u64);
    for (&r, &p) in scheme.removals().iter().zip(&state.p) {
        if r > 0 {
            acc += r as f64 * p.ln() - ln_factorial(r as u64);
        }
    }
    acc
}

/// Sequential uniform draw: `R_1` uniform on `{0..=cap}` (or `{0..=n-m}`),
/// each later free `R_j` uniform on `{0..=remaining}`, and `R_m` the leftover.
/// Returns the scheme with its path log density.
pub fn uniform_sequential_sample<R: Rng + ?Sized>(n: u32, m: u32, cap: Option<u32>, rng: &mut R) -> (Scheme, f64) {
    let total = n - m;
    let m = m as usize;
    let mut removals = Vec::with_capacity(m);
    let mut remaining = total;
    let mut log_density = 0.0;
    for j in 0..m - 1 {
        let bound = if j == 0 { cap.unwrap_or(total).min(total) } else { remaining };
        let x = rng.random_range(0..=bound);
        log_density -= ((bound + 1) as f64).ln();
        removals.push(x);
        remaining -= x;
    }
    removals.push(remaining);
    (Scheme::from_removals(removals).expect("sums to n - m"), log_density)
}

/// Path log density of `scheme` under [`uniform_sequential_sample`];
/// `-inf` when `R_1` exceeds the cap.
pub fn uniform_sequential_log_density(scheme: &Scheme, cap: Option<u32>) -> f64 {
    let total = scheme.censored();
    let r = scheme.removals();
    let mut remaining = total;
    let mut log_density = 0.0;
    for (j, &x) in r.iter().enumerate().take(r.len() - 1) {
        let bound = if j == 0 { cap.unwrap_or(total).min(total) } else { remaining };
        if x > bound {
            return f64::NEG_INFINITY;
        }
        log_density -= ((bound + 1) as f64).ln();
        remaining -= x;
    }
    log_density
}

/// Cell sizes for the initial multivariate hypergeometric draw: every
/// `M_j = n - m`.
pub fn mvhg_global_cells(n: u32, m: u32) -> Vec<u64> {
    vec![(n - m) as u64; m as usize]
}

pub fn mvhg_init<R: Rng + ?Sized>(n: u32, m: u32, rng: &mut R) -> Scheme {
    let removals = mvhg_draw(&mvhg_global_cells(n, m), (n - m) as u64, rng);
    Scheme::from_removals(removals).expect("sums to n - m")
}

/// Resample `selection` from the multivariate hypergeometric law whose cells
/// all equal the selected sub-total.
pub fn mvhg_update_at<R: Rng + ?Sized>(old: &Scheme, selection: &UpdateSelection, rng: &mut R) -> Scheme {
    let pos = selection.positions();
    let subtotal: u64 = pos.iter().map(|&i| old.removals()[i] as u64).sum();
    let cells = vec![subtotal; pos.len()];
    let values = mvhg_draw(&cells, subtotal, rng);
    old.with_replaced(pos, &values)
}

pub fn mvhg_update<R: Rng + ?Sized>(old: &Scheme, m1: usize, rng: &mut R) -> Scheme {
    let selection = UpdateSelection::of_size(old.m() as usize, m1, rng);
    mvhg_update_at(old, &selection, rng)
}

/// `ln[Π C(M_i, R_i) / C(M, R)]`.
pub fn mvhg_log_density(removals: &[u32], cells: &[u64], total_m: u64, total_r: u64) -> Result<f64, ProposalError> {
    let mut acc = -ln_binomial(total_m, total_r);
    for (position, (&r, &cell)) in removals.iter().zip(cells).enumerate() {
        if r as u64 > cell {
            return Err(ProposalError::UnsupportedValue { position, value: r, cell });
        }
        acc += ln_binomial(cell, r as u64);
    }
    Ok(acc)
}

/// Log density of a full scheme under the initial hypergeometric parameters.
pub fn mvhg_global_log_density(scheme: &Scheme) -> f64 {
    let cells = mvhg_global_cells(scheme.n(), scheme.m());
    let total = scheme.censored() as u64;
    mvhg_log_density(scheme.removals(), &cells, total * scheme.m() as u64, total)
        .expect("R_i <= n - m always holds")
}

/// A proposed move and the two log densities entering the acceptance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub scheme: Scheme,
    pub log_density: f64,
    pub current_log_density: f64,
}

/// Per-chain proposal mechanism.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: u32,
    m: u32,
    kind: SamplerState,
}

#[derive(Debug, Clone)]
enum SamplerState {
    Multinomial(Option<MultinomialState>),
    Uniform,
    Mvhg,
}

impl Sampler {
    pub fn new(kind: ProposalKind, n: u32, m: u32) -> Self {
        assert!(m >= 1 && n >= m);
        let kind = match kind {
            ProposalKind::Multinomial => SamplerState::Multinomial(None),
            ProposalKind::UniformSequential => SamplerState::Uniform,
            ProposalKind::MultivariateHypergeometric => SamplerState::Mvhg,
        };
        Sampler { n, m, kind }
    }

    pub fn kind(&self) -> ProposalKind {
        match self.kind {
            SamplerState::Multinomial(_) => ProposalKind::Multinomial,
            SamplerState::Uniform => ProposalKind::UniformSequential,
            SamplerState::Mvhg => ProposalKind::MultivariateHypergeometric,
        }
    }

    pub fn multinomial_state(&self) -> Option<&MultinomialState> {
        match &self.kind {
            SamplerState::Multinomial(state) => state.as_ref(),
            _ => None,
        }
    }

    /// Draw the chain's starting scheme and its log density.
    pub fn initial<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (Scheme, f64) {
        let (n, m) = (self.n, self.m);
        match &mut self.kind {
            SamplerState::Multinomial(slot) => {
                let (scheme, state) = multinomial_init(n, m, rng);
                let ld = multinomial_log_density(&scheme, &state);
                *slot = Some(state);
                (scheme, ld)
            }
            SamplerState::Uniform => uniform_sequential_sample(n, m, None, rng),
            SamplerState::Mvhg => {
                let scheme = mvhg_init(n, m, rng);
                let ld = mvhg_global_log_density(&scheme);
                (scheme, ld)
            }
        }
    }

    /// Propose a candidate from `current`, whose stored log density is
    /// `current_log_density`.
    pub fn propose<R: Rng + ?Sized>(
        &self,
        current: &Scheme,
        current_log_density: f64,
        policy: M1Policy,
        rng: &mut R,
    ) -> Candidate {
        let m = self.m as usize;
        match &self.kind {
            SamplerState::Multinomial(state) => {
                let state = state.as_ref().expect("initial() draws the cell probabilities");
                let selection = UpdateSelection::random(m, policy, rng);
                let scheme = multinomial_update_at(current, state, &selection, rng);
                Candidate {
                    log_density: multinomial_log_density(&scheme, state),
                    current_log_density: multinomial_log_density(current, state),
                    scheme,
                }
            }
            SamplerState::Uniform => {
                let position = rng.random_range(0..m);
                let cap = current.censored() - current.removals()[position];
                let (scheme, log_density) = uniform_sequential_sample(self.n, self.m, Some(cap), rng);
                Candidate {
                    scheme,
                    log_density,
                    current_log_density,
                }
            }
            SamplerState::Mvhg => {
                let selection = UpdateSelection::random(m, policy, rng);
                let scheme = mvhg_update_at(current, &selection, rng);
                Candidate {
                    log_density: mvhg_global_log_density(&scheme),
                    current_log_density: mvhg_global_log_density(current),
                    scheme,
                }
            }
        }
    }
}
