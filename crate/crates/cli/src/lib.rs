//! Command-line front end: configure problems, hierarchies, and solver
//! chains; run experiments and verification suites; emit machine-readable
//! reports.
//!
//! Exit-code contract (stable; CI keys off it):
//! - 0: all checks passed
//! - 1: at least one bound or identity check failed, or a runtime error
//! - 2: configuration error (bad JSON, bad schema, or a configuration
//!   that cannot be assembled, e.g. an invalid smoother)

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod report;

use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Bad config file, schema violation, or unusable configuration.
    Config(String),
    /// Computation or verification failed at runtime.
    Run(String),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Run(msg) => write!(f, "run error: {msg}"),
            CliError::Io(path, err) => write!(f, "{}: {err}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// Exit code per the contract above.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
            CliError::Io(..) => 1,
        }
    }
}

/// Configuration-shaped core failures (impossible setups requested by the
/// user) map to exit 2; numerical failures map to exit 1.
pub fn from_core(err: itl_core::Error) -> CliError {
    use itl_core::Error as E;
    match err {
        E::InvalidSize { .. }
        | E::InvalidSplit { .. }
        | E::UnsatisfiableFlag
        | E::SmootherInvalid { .. }
        | E::RankCondition { .. }
        | E::UnknownSolver { .. }
        | E::NotSpd { .. } => CliError::Config(err.to_string()),
        other => CliError::Run(other.to_string()),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
