//! Search for optimal progressive Type-II censoring schemes under Weibull
//! lifetimes.
//!
//! [`scheme`] models CS(n, m); [`criteria`] evaluates the variance and cost
//! criteria; [`search`] runs the accept/reject search with the samplers in
//! [`proposals`]; [`oracle`] enumerates the space exhaustively; and
//! [`montecarlo`] checks the closed forms by simulation.

pub mod criteria;
pub mod kamps_cramer;
pub mod montecarlo;
pub mod numfmt;
pub mod oracle;
pub mod proposals;
pub mod scalar;
pub mod scheme;
pub mod search;

pub use criteria::{
    criterion_transform, expected_final_failure_time, fisher_information, variance_criterion, CostCoefficients,
    CriterionError, CriterionSpec, Evaluator, FisherInfo, PrecisionPolicy, WeibullParams,
};
pub use oracle::{exhaustive_search, OracleConfig, OracleError, OracleResult};
pub use proposals::{M1Policy, ProposalKind};
pub use scalar::{ExtFloat, Real};
pub use scheme::{cardinality, enumerate_schemes, Scheme, SchemeError};
pub use search::{acceptance_probability, relative_efficiency, run_search, SearchConfig, SearchError, SearchReport};

/// Coefficients in double precision.
pub type KampsCramer = kamps_cramer::KampsCramerCoeffs<f64>;
/// Coefficients in single precision.
pub type KampsCramerF32 = kamps_cramer::KampsCramerCoeffs<f32>;
/// Coefficients in arbitrary precision.
pub type KampsCramerExt = kamps_cramer::KampsCramerCoeffs<ExtFloat>;
