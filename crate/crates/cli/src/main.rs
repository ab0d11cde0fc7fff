mod report;
mod settings;

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use censearch::oracle::{exhaustive_search_with, OracleResult};
use censearch::search::write_trace_csv;
use censearch::{
    relative_efficiency, run_search, CriterionSpec, OracleConfig, SearchConfig, SearchReport,
};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use report::{Cell, Table};
use settings::{Flags, Settings, SEED_ENV};

/// Optimal progressive Type-II censoring schemes for Weibull life tests.
#[derive(Debug, Parser)]
#[command(name = "censearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probabilistic accept/reject search for the optimal scheme
    Search(Flags),
    /// Exhaustive enumeration of CS(n, m)
    Oracle(Flags),
    /// Monte-Carlo check of the asymptotic log-quantile variance for a scheme
    Validate(Flags),
    /// Search against the exhaustive optimum, with the relative efficiency
    Compare(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Search(f) => ("search", f),
            Command::Oracle(f) => ("oracle", f),
            Command::Validate(f) => ("validate", f),
            Command::Compare(f) => ("compare", f),
        }
    }
}

const RESULT_COLUMNS: [&str; 12] = [
    "beta",
    "k",
    "n",
    "m",
    "criterion",
    "proposal",
    "seed",
    "best_scheme",
    "best_psi",
    "n_it",
    "n_ac",
    "extended_evaluations",
];

const COMPARE_COLUMNS: [&str; 12] = [
    "beta",
    "k",
    "n",
    "m",
    "proposal",
    "oracle_scheme",
    "oracle_psi",
    "n_it",
    "n_ac",
    "search_scheme",
    "search_psi",
    "r_eff1",
];

fn criterion_name(c: &CriterionSpec) -> &'static str {
    match c {
        CriterionSpec::IntegratedLogQuantileVariance => "variance",
        CriterionSpec::Cost(_) => "cost",
    }
}

fn search_config(s: &Settings) -> SearchConfig {
    let mut c = SearchConfig::new(s.n, s.m, s.params, s.criterion, s.proposal);
    c.iterations = s.iterations;
    c.seed = s.seed;
    c.m1_policy = s.m1;
    c.trace = s.trace.is_some();
    c.chains = s.chains;
    c.workers = s.workers;
    c
}

fn oracle(s: &Settings) -> Result<OracleResult, String> {
    let config = OracleConfig {
        budget: s.oracle_budget,
        workers: s.workers,
        ..OracleConfig::default()
    };
    exhaustive_search_with(s.n, s.m, &s.params, &s.criterion, &config).map_err(|e| e.to_string())
}

fn search(s: &Settings) -> Result<SearchReport, String> {
    let report = run_search(&search_config(s)).map_err(|e| e.to_string())?;
    if let (Some(path), Some(trace)) = (&s.trace, &report.trace) {
        let file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        write_trace_csv(trace, io::BufWriter::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(report)
}

fn head(s: &Settings) -> Vec<Cell> {
    vec![
        Cell::Float(s.params.beta()),
        Cell::Float(s.params.k()),
        Cell::Int(s.n.into()),
        Cell::Int(s.m.into()),
    ]
}

fn run(command: &str, s: &Settings) -> Result<Table, String> {
    // `search --oracle` runs the enumeration with the search output schema.
    let command = if command == "search" && s.oracle { "oracle" } else { command };
    match command {
        "oracle" => {
            let r = oracle(s)?;
            let mut t = Table::new("result", &RESULT_COLUMNS);
            let mut row = head(s);
            row.extend([
                Cell::Text(criterion_name(&s.criterion).into()),
                Cell::Text("exhaustive".into()),
                Cell::Int(s.seed),
                Cell::Scheme(r.best_scheme),
                Cell::Float(r.best_psi),
                Cell::Int(r.evaluated),
                Cell::Int(0),
                Cell::Int(r.extended_evaluations),
            ]);
            t.push(row);
            Ok(t)
        }
        "search" => {
            let r = search(s)?;
            let mut t = Table::new("result", &RESULT_COLUMNS);
            let mut row = head(s);
            let extended = r.extended_evaluations();
            row.extend([
                Cell::Text(criterion_name(&s.criterion).into()),
                Cell::Text(s.proposal.name().into()),
                Cell::Int(s.seed),
                Cell::Scheme(r.best_scheme),
                Cell::Float(r.best_psi),
                Cell::Int(r.n_it),
                Cell::Int(r.n_ac),
                Cell::Int(extended),
            ]);
            t.push(row);
            Ok(t)
        }
        "compare" => {
            let exact = oracle(s)?;
            let found = search(s)?;
            let r_eff = relative_efficiency(exact.best_psi, found.best_psi).map_err(|e| e.to_string())?;
            let mut t = Table::new("compare", &COMPARE_COLUMNS);
            let mut row = head(s);
            row.extend([
                Cell::Text(s.proposal.name().into()),
                Cell::Scheme(exact.best_scheme),
                Cell::Float(exact.best_psi),
                Cell::Int(found.n_it),
                Cell::Int(found.n_ac),
                Cell::Scheme(found.best_scheme),
                Cell::Float(found.best_psi),
                Cell::Float(r_eff),
            ]);
            t.push(row);
            Ok(t)
        }
        "validate" => {
            let scheme = s.scheme.as_ref().ok_or("validate needs --scheme")?;
            let check = || {
                censearch::montecarlo::empirical_variance_check(scheme, &s.params, &s.s_grid, s.replications, s.seed)
            };
            let rows = match s.workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| e.to_string())?
                    .install(check),
                None => check(),
            }
            .map_err(|e| e.to_string())?;
            let mut t = Table::new("variance", &censearch::montecarlo::VARIANCE_HEADER);
            for r in rows {
                t.push(vec![
                    Cell::Float(r.s),
                    Cell::Float(r.empirical),
                    Cell::Float(r.asymptotic),
                    Cell::Float(r.ratio),
                    Cell::Int(r.replications as u64),
                    Cell::Int(r.excluded as u64),
                ]);
            }
            Ok(t)
        }
        _ => unreachable!("clap restricts subcommands"),
    }
}

/// Report a flag error with the subcommand's usage and exit with status 2.
fn usage_error(command: &str, message: String) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let sub = cmd.find_subcommand_mut(command).expect("known subcommand");
    sub.error(ErrorKind::ValueValidation, message).exit()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Value errors from clap omit the usage line; add it for consistency.
        Err(e) if e.use_stderr() && !e.to_string().contains("Usage:") => {
            eprint!("{e}");
            eprintln!("\n{}", Cli::command().render_usage());
            std::process::exit(2);
        }
        Err(e) => e.exit(),
    };
    let (command, flags) = cli.command.parts();
    let mut flags = flags.clone();
    if let Some(path) = flags.config.clone() {
        let text = fs::read_to_string(&path)
            .unwrap_or_else(|e| usage_error(command, format!("--config {}: {e}", path.display())));
        if let Err(e) = flags.fill_from_file(&text) {
            usage_error(command, format!("--config {}: {e}", path.display()));
        }
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    let settings = Settings::resolve(&flags, env_seed.as_deref()).unwrap_or_else(|e| usage_error(command, e));
    if command == "validate" && settings.scheme.is_none() {
        usage_error(command, "validate needs --scheme".into());
    }
    if flags.print_config {
        eprint!("command={command}\n{}", settings.to_config());
    }

    let table = match run(command, &settings) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let text = table.render(settings.format);
    let written = match &settings.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
