use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("theta = {theta} is outside the domain (theta must exceed {lower})")]
    Domain { theta: f64, lower: f64 },

    #[error("monte-carlo estimate diverges at theta = {theta}: {reason}")]
    Divergence { theta: f64, reason: String },

    #[error("splitting law `{0}` is lattice (geometric); asymptotic constants are not defined for it")]
    LatticeLaw(String),

    #[error("critical exponent search inconclusive: {0}")]
    Inconclusive(String),

    #[error("limit did not stabilize: {0}")]
    NonConvergence(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("expansion budget of {budget} node visits exceeded at generation {generation}")]
    BudgetExceeded { budget: u64, generation: u32 },

    #[error("invalid splitting law: {0}")]
    InvalidLaw(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("result set is empty")]
    EmptyResults,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed table: {0}")]
    Parse(String),
}
