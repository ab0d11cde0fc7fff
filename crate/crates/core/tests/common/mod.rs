//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use censearch::kamps_cramer::gammas;
use censearch::{FisherInfo, Scheme};
use quadrature::double_exponential::integrate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Densities at `z` of `Z_i = Exp(rates[0]) + ... + Exp(rates[i-1])` for every
/// `i`, summed over `i` after weighting by `weight(i)`. Uses uniformization of
/// the pure-birth chain through the rates, so every term is non-negative.
pub fn hypoexponential_density_sum(rates: &[f64], z: f64, weight: impl Fn(usize) -> f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let lambda = rates.iter().cloned().fold(0.0, f64::max);
    let mu = lambda * z;
    let stop = (mu + 40.0 * mu.sqrt() + 60.0).ceil() as usize;
    let mut v = vec![0.0; rates.len()];
    v[0] = 1.0;
    let mut acc = 0.0;
    let mut log_p = -mu;
    for n in 0..=stop {
        if n > 0 {
            log_p += mu.ln() - (n as f64).ln();
        }
        if log_p > -745.0 {
            let p = log_p.exp();
            // Z_{i+1} has density γ_{i+1} P(chain in state i at time z).
            for (i, (&vi, &ri)) in v.iter().zip(rates).enumerate() {
                acc += p * vi * ri * weight(i);
            }
        }
        for j in (0..rates.len()).rev() {
            let out = v[j] * rates[j] / lambda;
            v[j] -= out;
            if j + 1 < rates.len() {
                v[j + 1] += out;
            }
        }
    }
    acc
}

pub fn hypoexponential_density(rates: &[f64], z: f64) -> f64 {
    let last = rates.len() - 1;
    hypoexponential_density_sum(rates, z, |i| if i == last { 1.0 } else { 0.0 })
}

/// `Σ_i ∫_0^∞ φ(z) f_{Z_i}(z) dz` by double-exponential quadrature after
/// `z = t/(1-t)`, cut where the `Gamma(m, min rate)` envelope is negligible.
pub fn summed_expectation(rates: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    let slowest = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_max = (80.0 + 3.0 * rates.len() as f64) / slowest;
    integrate(
        |t| {
            let z = t / (1.0 - t);
            if t <= 0.0 || z > z_max {
                return 0.0;
            }
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            phi(z) * hypoexponential_density_sum(rates, z, |_| 1.0) * jac
        },
        0.0,
        1.0,
        1e-14,
    )
    .integral
}

/// Fisher information from the hazard representation
/// `I = Σ_i E[∇ ln h(X_{i:m:n}) ∇ ln h(X_{i:m:n})ᵀ]`, where for the Weibull
/// hazard `∂_β ln h = (1 + ln Z)/β`, `∂_k ln h = β/k` and `Z = (kX)^β` is a
/// sum of independent `Exp(γ_j)`.
pub fn fisher_by_quadrature(scheme: &Scheme, beta: f64, k: f64) -> FisherInfo {
    let g: Vec<f64> = gammas(scheme).into_iter().map(|x| x as f64).collect();
    let e1 = summed_expectation(&g, |z| 1.0 + z.ln());
    let e2 = summed_expectation(&g, |z| (1.0 + z.ln()).powi(2));
    let m = g.len() as f64;
    FisherInfo {
        i11: e2 / (beta * beta),
        i12: e1 / k,
        i22: m * beta * beta / (k * k),
    }
}

/// A random scheme in CS(n, m) drawn by stars and bars.
pub fn random_scheme(rng: &mut impl Rng, n: u32, m: u32) -> Scheme {
    let total = n - m;
    let mut cuts: Vec<u32> = (0..m - 1).map(|_| rng.random_range(0..=total)).collect();
    cuts.sort_unstable();
    let mut removals = Vec::with_capacity(m as usize);
    let mut prev = 0;
    for c in cuts {
        removals.push(c - prev);
        prev = c;
    }
    removals.push(total - prev);
    Scheme::from_removals(removals).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
