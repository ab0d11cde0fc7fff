//! Run settings: command-line flags over a flat `key=value` file over
//! `CENSEARCH_SEED` over defaults.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use censearch::oracle::DEFAULT_BUDGET;
use censearch::search::{DEFAULT_ITERATIONS, DEFAULT_SEED};
use censearch::{CostCoefficients, CriterionSpec, M1Policy, ProposalKind, Scheme, WeibullParams};
use clap::{Args, ValueEnum};

pub const SEED_ENV: &str = "CENSEARCH_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionName {
    Variance,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalName {
    Multinomial,
    Uniform,
    Mvhg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
    Pretty,
}

/// Flags shared by every command. All optional so a config file can fill them.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of units on test
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of observed failures
    #[arg(long)]
    pub m: Option<u32>,
    /// Weibull shape
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weibull scale (rate form: S(x) = exp(-(k x)^beta))
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionName>,
    /// Fixed cost (cost criterion)
    #[arg(long)]
    pub co: Option<f64>,
    /// Cost per observed failure (cost criterion)
    #[arg(long)]
    pub cf: Option<f64>,
    /// Cost per unit of test time (cost criterion)
    #[arg(long)]
    pub ct: Option<f64>,
    #[arg(long, value_enum)]
    pub proposal: Option<ProposalName>,
    /// Iterations per chain
    #[arg(long)]
    pub iters: Option<u64>,
    /// Random seed [env: CENSEARCH_SEED]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent search chains
    #[arg(long)]
    pub chains: Option<usize>,
    /// Worker threads for search chains and the oracle
    #[arg(long)]
    pub workers: Option<usize>,
    /// Positions resampled per update: `auto` or a fixed count
    #[arg(long)]
    pub m1: Option<String>,
    /// Write the per-iteration trace as CSV to this path
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Largest |CS(n, m)| the oracle will enumerate
    #[arg(long)]
    pub oracle_budget: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output path (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the exhaustive oracle instead of the search
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub oracle: Option<bool>,
    /// Scheme to validate, e.g. `0^19,20`
    #[arg(long)]
    pub scheme: Option<String>,
    /// Monte-Carlo replications (validate)
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated quantile levels (validate)
    #[arg(long)]
    pub s_grid: Option<String>,
    /// Flat key=value file supplying any flag; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Echo the resolved configuration to standard error
    #[arg(long)]
    pub print_config: bool,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, String> {
    T::from_str(value, false).map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

impl Flags {
    /// Fill unset fields from `key=value` lines; `#` starts a comment.
    pub fn fill_from_file(&mut self, text: &str) -> Result<(), String> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", number + 1))?;
            let (key, value) = (key.trim().replace('_', "-"), value.trim());
            let k = key.as_str();
            macro_rules! fill {
                ($field:ident, $v:expr) => {
                    if self.$field.is_none() {
                        self.$field = Some($v);
                    }
                };
            }
            match k {
                "n" => fill!(n, parse(k, value)?),
                "m" => fill!(m, parse(k, value)?),
                "beta" => fill!(beta, parse(k, value)?),
                "k" => fill!(k, parse(k, value)?),
                "criterion" => fill!(criterion, parse_enum(k, value)?),
                "co" => fill!(co, parse(k, value)?),
                "cf" => fill!(cf, parse(k, value)?),
                "ct" => fill!(ct, parse(k, value)?),
                "proposal" => fill!(proposal, parse_enum(k, value)?),
                "iters" => fill!(iters, parse(k, value)?),
                "seed" => fill!(seed, parse(k, value)?),
                "chains" => fill!(chains, parse(k, value)?),
                "workers" => fill!(workers, parse(k, value)?),
                "m1" => fill!(m1, value.to_string()),
                "trace" => fill!(trace, PathBuf::from(value)),
                "oracle-budget" => fill!(oracle_budget, parse(k, value)?),
                "format" => fill!(format, parse_enum(k, value)?),
                "out" => fill!(out, PathBuf::from(value)),
                "oracle" => fill!(oracle, parse(k, value)?),
                "scheme" => fill!(scheme, value.to_string()),
                "replications" => fill!(replications, parse(k, value)?),
                "s-grid" => fill!(s_grid, value.to_string()),
                other => return Err(format!("config line {}: unknown key `{other}`", number + 1)),
            }
        }
        Ok(())
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub n: u32,
    pub m: u32,
    pub params: WeibullParams,
    pub criterion: CriterionSpec,
    pub proposal: ProposalKind,
    pub iterations: u64,
    pub seed: u64,
    pub chains: usize,
    pub workers: Option<usize>,
    pub m1: M1Policy,
    pub trace: Option<PathBuf>,
    pub oracle_budget: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub oracle: bool,
    pub scheme: Option<Scheme>,
    pub replications: usize,
    pub s_grid: Vec<f64>,
}

impl Settings {
    /// Resolve `flags`; `env_seed` is the value of `CENSEARCH_SEED`, if set.
    /// `needs_nm` is false when `n` and `m` may come from `--scheme`.
    pub fn resolve(flags: &Flags, env_seed: Option<&str>) -> Result<Self, String> {
        let scheme = flags
            .scheme
            .as_deref()
            .map(|s| s.parse::<Scheme>().map_err(|e| format!("--scheme: {e}")))
            .transpose()?;
        let n = flags.n.or(scheme.as_ref().map(|s| s.n())).ok_or("--n is required")?;
        let m = flags.m.or(scheme.as_ref().map(|s| s.m())).ok_or("--m is required")?;
        if m == 0 || n < m {
            return Err(format!("need n >= m >= 1, got n = {n}, m = {m}"));
        }
        if let Some(s) = &scheme {
            if (s.n(), s.m()) != (n, m) {
                return Err(format!("--scheme {s} is not in CS({n}, {m})"));
            }
        }

        let params =
            WeibullParams::new(flags.beta.unwrap_or(1.0), flags.k.unwrap_or(1.0)).map_err(|e| e.to_string())?;
        let costs = [flags.co, flags.cf, flags.ct];
        let criterion = match flags.criterion.unwrap_or(CriterionName::Variance) {
            CriterionName::Variance => {
                if costs.iter().any(Option::is_some) {
                    return Err("--co/--cf/--ct apply only to --criterion cost".into());
                }
                CriterionSpec::IntegratedLogQuantileVariance
            }
            CriterionName::Cost => match costs {
                [Some(co), Some(cf), Some(ct)] => {
                    CriterionSpec::Cost(CostCoefficients::new(co, cf, ct).map_err(|e| e.to_string())?)
                }
                _ => return Err("--criterion cost needs --co, --cf and --ct".into()),
            },
        };

        let proposal = match flags.proposal.unwrap_or(ProposalName::Multinomial) {
            ProposalName::Multinomial => ProposalKind::Multinomial,
            ProposalName::Uniform => ProposalKind::UniformSequential,
            ProposalName::Mvhg => ProposalKind::MultivariateHypergeometric,
        };
        let iterations = flags.iters.unwrap_or(DEFAULT_ITERATIONS);
        if iterations == 0 {
            return Err("--iters must be at least 1".into());
        }
        let seed = match (flags.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV}={v} is not an unsigned integer"))?,
            (None, None) => DEFAULT_SEED,
        };
        let chains = flags.chains.unwrap_or(1);
        if chains == 0 {
            return Err("--chains must be at least 1".into());
        }
        if flags.workers == Some(0) {
            return Err("--workers must be at least 1".into());
        }
        let m1 = match flags.m1.as_deref().unwrap_or("auto") {
            "auto" => M1Policy::Uniform,
            v => {
                let fixed: usize = parse("m1", v)?;
                if fixed == 0 || fixed > m as usize {
                    return Err(format!("--m1 must be auto or lie in 1..={m}"));
                }
                M1Policy::Fixed(fixed)
            }
        };
        let s_grid = match flags.s_grid.as_deref() {
            None => vec![0.1, 0.25, 0.5, 0.75, 0.9],
            Some(text) => text
                .split(',')
                .map(|t| parse::<f64>("s-grid", t.trim()))
                .collect::<Result<_, _>>()?,
        };
        if s_grid.is_empty() || s_grid.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err("--s-grid levels must lie in (0, 1)".into());
        }
        let replications = flags.replications.unwrap_or(5000);
        if replications < censearch::montecarlo::MIN_REPLICATIONS {
            return Err(format!(
                "--replications must be at least {}",
                censearch::montecarlo::MIN_REPLICATIONS
            ));
        }
        Ok(Settings {
            n,
            m,
            params,
            criterion,
            proposal,
            iterations,
            seed,
            chains,
            workers: flags.workers,
            m1,
            trace: flags.trace.clone(),
            oracle_budget: flags.oracle_budget.unwrap_or(DEFAULT_BUDGET),
            format: flags.format.unwrap_or(Format::Pretty),
            out: flags.out.clone(),
            oracle: flags.oracle.unwrap_or(false),
            scheme,
            replications,
            s_grid,
        })
    }

    /// The resolved settings in config-file syntax.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        line("n", self.n.to_string());
        line("m", self.m.to_string());
        line("beta", self.params.beta().to_string());
        line("k", self.params.k().to_string());
        match self.criterion {
            CriterionSpec::IntegratedLogQuantileVariance => line("criterion", "variance".into()),
            CriterionSpec::Cost(c) => {
                line("criterion", "cost".into());
                line("co", c.c_o.to_string());
                line("cf", c.c_f.to_string());
                line("ct", c.c_t.to_string());
            }
        }
        line("proposal", self.proposal.name().into());
        line("iters", self.iterations.to_string());
        line("seed", self.seed.to_string());
        line("chains", self.chains.to_string());
        if let Some(w) = self.workers {
            line("workers", w.to_string());
        }
        line(
            "m1",
            match self.m1 {
                M1Policy::Uniform => "auto".into(),
                M1Policy::Fixed(v) => v.to_string(),
            },
        );
        if let Some(t) = &self.trace {
            line("trace", t.display().to_string());
        }
        line("oracle-budget", self.oracle_budget.to_string());
        line(
            "format",
            self.format.to_possible_value().expect("no skipped variants").get_name().into(),
        );
        if let Some(o) = &self.out {
            line("out", o.display().to_string());
        }
        line("oracle", self.oracle.to_string());
        if let Some(s) = &self.scheme {
            line("scheme", s.to_string());
        }
        line("replications", self.replications.to_string());
        line(
            "s-grid",
            self.s_grid.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        out
    }
}
