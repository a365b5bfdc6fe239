//! Exact experimental designs for discriminating between two rival nonlinear
//! regression models.
//!
//! The toolkit evaluates a linearized distance criterion `delta_r` between the
//! mean-value surfaces of two regression models over cuboid nominal confidence
//! sets of tunable radius `r`, searches for exact designs maximizing it,
//! computes upper confidence bounds on the useful range of `r` (an iterative
//! scheme and a linear-programming bound), and measures realized discrimination
//! performance by Monte-Carlo simulation of the likelihood-ratio decision rule.
//!
//! Module map:
//! - [`model`]: regression models, design spaces, exact designs, built-in pairs
//! - [`linearize`]: linearized model pairs and the quadratic form of the criterion
//! - [`bvls`]: bounded-variable least squares (active set)
//! - [`criterion`]: `delta_r` evaluation for fixed designs
//! - [`search`]: KL exchange, complete enumeration, efficient rounding
//! - [`simplex`]: dense two-phase simplex
//! - [`bounds`]: upper confidence bounds for `r`
//! - [`stats`]: chi-square tail machinery for the correct-decision lower bound
//! - [`sim`]: Monte-Carlo discrimination harness
//! - [`io`]: CSV / report serialization used by the command-line front end

pub mod bounds;
pub mod bvls;
pub mod criterion;
pub mod io;
pub mod linearize;
pub mod model;
pub mod search;
pub mod sim;
pub mod simplex;
pub mod stats;

pub use bounds::{bound_iterative, bound_lp, conditionally_linear_certificate, BoundResult};
pub use bvls::{bvls, BoundStatus, BvlsSolution};
pub use criterion::{delta_given_theta, delta_r, delta_unrestricted, ConfidenceBox};
pub use linearize::{linearize, quadratic_components, LinearizedPair, QuadraticForm};
pub use model::{
    builtin_pair, encompassing_mean, mean_vector, DesignSpace, DiscriminationProblem, ExactDesign,
    RegressionModel,
};
pub use search::{enumerate_optimal, kl_exchange, round_approximate, sweep_r, SearchConfig, SearchResult};
pub use sim::{
    batch_hit_rates, decide, fit_mle, run_simulation, Decision, ErrorKind, ErrorModel, FitConfig,
    SimConfig, SimReport,
};
pub use simplex::{simplex_solve, LpOutcome, LpProblem};
pub use stats::correct_decision_lower_bound;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Splitmix-style mixing used to derive independent seeded substreams from
/// `(seed, index, tag)` triples.
pub(crate) fn mix64(seed: u64, a: u64, tag: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E3779B97F4A7C15) ^ tag.wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A name was not found in a registry.
    #[error("not found: {0}")]
    NotFound(String),

    /// A model evaluation left its numeric domain (division by zero,
    /// non-finite mean, log of a non-positive value, ...).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// An iterative solver failed to converge; the message carries diagnostics.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Complete enumeration was refused because the candidate count exceeds the guard.
    #[error("enumeration of {candidates} designs exceeds the guard of {guard}")]
    EnumerationGuard { candidates: u128, guard: u128 },

    /// Every multistart of a maximum-likelihood fit failed to converge.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Underlying I/O error.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed input file or configuration.
    #[error("parse error: {0}")]
    Parse(String),
}
