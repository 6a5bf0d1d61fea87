//! Error type shared by every module.

use thiserror::Error;

/// Broad failure classes, mapped to CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, bad configuration or I/O failure (exit code 2).
    Usage,
    /// A numerical or verification assertion failed (exit code 1).
    Assertion,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("unknown surface preset `{0}`")]
    UnknownPreset(String),
    #[error("surface is not periodic: {0}")]
    NotPeriodic(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("time step {dt} exceeds the advective limit; use dt <= {required}")]
    Cfl { dt: f64, required: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("vorticity has nonzero mean {0:e}; inversion requires a mean-free field")]
    NonzeroMean(f64),
    #[error("tail truncation too short: z_max = {z_max} leaves tail {tail:e} above tolerance {tol:e}")]
    Tail { z_max: f64, tail: f64, tol: f64 },
    #[error("divergence defect reaches the wall region (|defect| = {0:e} near a boundary)")]
    DefectSupport(f64),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("residual blow-up: singular terms did not cancel (ratio {ratio:e}, largest term `{term}`)")]
    Blowup { ratio: f64, term: String },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("unknown artifact `{0}`")]
    UnknownArtifact(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Assertion(_) | Error::Blowup { .. } | Error::Cfl { .. } | Error::NonFinite(_) => {
                ErrorClass::Assertion
            }
            _ => ErrorClass::Usage,
        }
    }

    /// Short machine-readable tag printed by the CLI.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Grid(_) => "grid",
            Error::UnknownPreset(_) => "unknown-preset",
            Error::NotPeriodic(_) => "not-periodic",
            Error::Parameter(_) => "parameter",
            Error::Config(_) => "config",
            Error::Cfl { .. } => "cfl",
            Error::NonFinite(_) => "non-finite",
            Error::NonzeroMean(_) => "nonzero-mean",
            Error::Tail { .. } => "tail",
            Error::DefectSupport(_) => "defect-support",
            Error::Mismatch(_) => "mismatch",
            Error::Blowup { .. } => "blowup",
            Error::Insufficient(_) => "insufficient",
            Error::Assertion(_) => "assertion",
            Error::UnknownArtifact(_) => "unknown-artifact",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
