//! Accept/reject search over CS(n, m).
//!
//! A chain starts from a proposal draw; every step proposes a candidate,
//! evaluates ψ and accepts with
//! `α = min{1, exp[(ψ_old - ψ_new) + (ln π_old - ln π_new)]}`.
//! The best scheme over every evaluated candidate is the run's output.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{CriterionError, CriterionSpec, Evaluator, WeibullParams};
use crate::numfmt::sig17;
use crate::proposals::{M1Policy, ProposalKind, Sampler};
use crate::scheme::Scheme;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ITERATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("current state has zero proposal density")]
    InvalidDensity,
    #[error("relative efficiency needs positive values, got {reference} and {candidate}")]
    NonPositive { reference: f64, candidate: f64 },
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n: u32,
    pub m: u32,
    pub params: WeibullParams,
    pub criterion: CriterionSpec,
    pub proposal: ProposalKind,
    pub iterations: u64,
    pub seed: u64,
    pub m1_policy: M1Policy,
    pub trace: bool,
    /// Independent chains; chain `c` uses stream `c` of the seeded generator.
    pub chains: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SearchConfig {
    pub fn new(n: u32, m: u32, params: WeibullParams, criterion: CriterionSpec, proposal: ProposalKind) -> Self {
        SearchConfig {
            n,
            m,
            params,
            criterion,
            proposal,
            iterations: DEFAULT_ITERATIONS,
            seed: DEFAULT_SEED,
            m1_policy: M1Policy::Uniform,
            trace: false,
            chains: 1,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: String| Err(SearchError::InvalidConfig(msg));
        if self.m == 0 || self.n < self.m {
            return bad(format!("need n >= m >= 1, got n = {}, m = {}", self.n, self.m));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.m1_policy.check(self.m as usize).is_err() {
            return bad(format!("m1 must lie in 1..={}", self.m));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub chain: usize,
    pub iteration: u64,
    pub scheme: Scheme,
    pub psi: f64,
    pub accepted: bool,
    /// Best ψ of the chain after this step.
    pub best_psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub best_scheme: Scheme,
    pub best_psi: f64,
    pub n_it: u64,
    pub n_ac: u64,
    /// Evaluations that fell back to extended precision.
    pub extended_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub best_scheme: Scheme,
    pub best_psi: f64,
    /// Totals over all chains.
    pub n_it: u64,
    pub n_ac: u64,
    pub seed: u64,
    pub chains: Vec<ChainSummary>,
    pub trace: Option<Vec<TraceRecord>>,
}

impl SearchReport {
    pub fn extended_evaluations(&self) -> u64 {
        self.chains.iter().map(|c| c.extended_evaluations).sum()
    }
}

/// `min{1, exp[(ψ_old - ψ_new) + (ln π_old - ln π_new)]}`.
pub fn acceptance_probability(
    psi_old: f64,
    psi_new: f64,
    log_dens_old: f64,
    log_dens_new: f64,
) -> Result<f64, SearchError> {
    if log_dens_old == f64::NEG_INFINITY {
        return Err(SearchError::InvalidDensity);
    }
    let log_ratio = (psi_old - psi_new) + (log_dens_old - log_dens_new);
    if log_ratio >= 0.0 {
        Ok(1.0)
    } else {
        Ok(log_ratio.exp())
    }
}

/// `ψ_reference / ψ_candidate`.
pub fn relative_efficiency(reference: f64, candidate: f64) -> Result<f64, SearchError> {
    if !(reference > 0.0 && candidate > 0.0) || !reference.is_finite() || !candidate.is_finite() {
        return Err(SearchError::NonPositive { reference, candidate });
    }
    Ok(reference / candidate)
}

/// Run the configured chains with a fresh memoizing evaluator.
pub fn run_search(config: &SearchConfig) -> Result<SearchReport, SearchError> {
    let evaluator = Evaluator::new(config.params, config.criterion);
    run_search_with(config, &evaluator)
}

/// Run the configured chains against a caller-supplied evaluator, whose
/// parameters and criterion take precedence over the config's.
pub fn run_search_with(config: &SearchConfig, evaluator: &Evaluator) -> Result<SearchReport, SearchError> {
    config.validate()?;
    let run_all = || {
        (0..config.chains)
            .into_par_iter()
            .map(|chain| run_chain(config, evaluator, chain))
            .collect::<Result<Vec<_>, _>>()
    };
    let results = match config.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };

    let mut summaries = Vec::with_capacity(results.len());
    let mut trace = config.trace.then(Vec::new);
    for (summary, chain_trace) in results {
        if let (Some(all), Some(part)) = (trace.as_mut(), chain_trace) {
            all.extend(part);
        }
        summaries.push(summary);
    }
    // Lowest chain index wins ties.
    let best = summaries
        .iter()
        .reduce(|a, b| if b.best_psi < a.best_psi { b } else { a })
        .expect("at least one chain");
    Ok(SearchReport {
        best_scheme: best.best_scheme.clone(),
        best_psi: best.best_psi,
        n_it: summaries.iter().map(|c| c.n_it).sum(),
        n_ac: summaries.iter().map(|c| c.n_ac).sum(),
        seed: config.seed,
        chains: summaries,
        trace,
    })
}

fn run_chain(
    config: &SearchConfig,
    evaluator: &Evaluator,
    chain: usize,
) -> Result<(ChainSummary, Option<Vec<TraceRecord>>), SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let mut sampler = Sampler::new(config.proposal, config.n, config.m);
    let mut extended = 0u64;
    let mut evaluate = |scheme: &Scheme| -> Result<f64, SearchError> {
        let e = evaluator.evaluate(scheme)?;
        extended += e.extended as u64;
        Ok(e.value)
    };

    let (mut current, mut current_ld) = sampler.initial(&mut rng);
    let mut current_psi = evaluate(&current)?;
    let mut best_scheme = current.clone();
    let mut best_psi = current_psi;
    let mut n_ac = 0u64;
    let mut trace = config.trace.then(|| Vec::with_capacity(config.iterations.min(1 << 20) as usize));

    for iteration in 1..=config.iterations {
        let candidate = sampler.propose(&current, current_ld, config.m1_policy, &mut rng);
        let psi = evaluate(&candidate.scheme)?;
        let alpha = acceptance_probability(current_psi, psi, candidate.current_log_density, candidate.log_density)?;
        let accepted = rng.random::<f64>() < alpha;
        if psi < best_psi {
            best_psi = psi;
            best_scheme = candidate.scheme.clone();
        }
        if let Some(t) = trace.as_mut() {
            t.push(TraceRecord {
                chain,
                iteration,
                scheme: candidate.scheme.clone(),
                psi,
                accepted,
                best_psi,
            });
        }
        if accepted {
            n_ac += 1;
            current = candidate.scheme;
            current_psi = psi;
            current_ld = candidate.log_density;
        }
    }

    let summary = ChainSummary {
        chain,
        best_scheme,
        best_psi,
        n_it: config.iterations,
        n_ac,
        extended_evaluations: extended,
    };
    Ok((summary, trace))
}

pub const TRACE_HEADER: [&str; 6] = ["chain", "iteration", "scheme", "psi", "accepted", "best_psi"];

/// Write trace records as CSV with [`TRACE_HEADER`].
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.chain.to_string(),
            r.iteration.to_string(),
            r.scheme.to_string(),
            sig17(r.psi),
            r.accepted.to_string(),
            sig17(r.best_psi),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::enumerate_schemes;
    use std::collections::HashSet;

    fn config(n: u32, m: u32, beta: f64, proposal: ProposalKind) -> SearchConfig {
        SearchConfig::new(
            n,
            m,
            WeibullParams::new(beta, 1.0).unwrap(),
            CriterionSpec::IntegratedLogQuantileVariance,
            proposal,
        )
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(1.0, 1.0, -2.0, -2.0).unwrap(), 1.0);
        assert_eq!(acceptance_probability(1.0, 0.0, -2.0, -2.0).unwrap(), 1.0);
        let half = acceptance_probability(1.0, 1.0 + 2f64.ln(), -2.0, -2.0).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        assert_eq!(
            acceptance_probability(1.0, 1.0, f64::NEG_INFINITY, -1.0),
            Err(SearchError::InvalidDensity)
        );
        // A more likely candidate under the proposal is penalized.
        let p = acceptance_probability(1.0, 1.0, -3.0, -2.0).unwrap();
        assert!((p - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn relative_efficiency_examples() {
        assert_eq!(relative_efficiency(2.5, 2.5).unwrap(), 1.0);
        assert!(relative_efficiency(0.0, 1.0).is_err());
        assert!(relative_efficiency(1.0, -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = config(10, 5, 1.0, ProposalKind::Multinomial);
        assert!(c.validate().is_ok());
        c.iterations = 0;
        assert!(c.validate().is_err());
        c.iterations = 1;
        c.m1_policy = M1Policy::Fixed(6);
        assert!(c.validate().is_err());
        c.m1_policy = M1Policy::Fixed(5);
        assert!(c.validate().is_ok());
        c.chains = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_iteration_bookkeeping() {
        for kind in ProposalKind::ALL {
            let mut c = config(10, 5, 1.0, kind);
            c.iterations = 1;
            c.trace = true;
            let report = run_search(&c).unwrap();
            assert_eq!(report.n_it, 1);
            assert!(report.n_ac <= 1);
            let trace = report.trace.unwrap();
            assert_eq!(trace.len(), 1);
            assert!(report.best_psi <= trace[0].psi);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        for kind in ProposalKind::ALL {
            let mut c = config(12, 4, 0.5, kind);
            c.iterations = 2000;
            c.trace = true;
            c.chains = 3;
            assert_eq!(run_search(&c).unwrap(), run_search(&c).unwrap(), "{kind}");
            c.workers = Some(1);
            let serial = run_search(&c).unwrap();
            c.workers = Some(3);
            assert_eq!(serial, run_search(&c).unwrap());
        }
    }

    #[test]
    fn trace_invariants() {
        for kind in ProposalKind::ALL {
            let mut c = config(10, 5, 2.0, kind);
            c.iterations = 3000;
            c.trace = true;
            c.chains = 2;
            let report = run_search(&c).unwrap();
            let trace = report.trace.as_ref().unwrap();
            let accepted = trace.iter().filter(|t| t.accepted).count() as u64;
            assert_eq!(accepted, report.n_ac);
            assert!(report.n_ac <= report.n_it);
            for pair in trace.windows(2).filter(|w| w[0].chain == w[1].chain) {
                assert!(pair[1].best_psi <= pair[0].best_psi);
            }
            let min_seen = trace.iter().map(|t| t.psi).fold(f64::INFINITY, f64::min);
            assert!(report.best_psi <= min_seen);
        }
    }

    #[test]
    fn every_scheme_of_cs63_is_visited() {
        let all: HashSet<Scheme> = enumerate_schemes(6, 3).unwrap().collect();
        assert_eq!(all.len(), 10);
        for kind in ProposalKind::ALL {
            let mut c = config(6, 3, 1.0, kind);
            c.iterations = 100_000;
            c.trace = true;
            let report = run_search(&c).unwrap();
            let seen: HashSet<Scheme> = report.trace.unwrap().into_iter().map(|t| t.scheme).collect();
            assert_eq!(seen, all, "{kind}");
        }
    }

    #[test]
    fn complete_sample_space_is_trivial() {
        for kind in ProposalKind::ALL {
            let mut c = config(5, 5, 1.0, kind);
            c.iterations = 50;
            let report = run_search(&c).unwrap();
            assert_eq!(report.best_scheme, Scheme::complete(5));
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut c = config(6, 3, 1.0, ProposalKind::Multinomial);
        c.iterations = 3;
        c.trace = true;
        let report = run_search(&c).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(report.trace.as_ref().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "chain,iteration,scheme,psi,accepted,best_psi");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,\""));
    }
}
