use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("norm drifted to {norm} before renormalization at t = {t} s (step too large?)")]
    NormDrift { norm: f64, t: f64 },

    #[error("phase point is within {margin:e} of the coordinate boundary")]
    BoundaryProximity { margin: f64 },

    #[error("m_F = {component} population {population:e} is too small to define a phase")]
    DegeneratePhase { component: i32, population: f64 },

    #[error("companion trajectory left the physical domain {retries} times in a row")]
    DegenerateCompanion { retries: u32 },

    #[error("need {needed} samples, trajectory has {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("Jacobi eigensolver did not converge (off-diagonal residual {residual:e} after {sweeps} sweeps)")]
    EigFail { residual: f64, sweeps: usize },

    #[error("{what} = {value} outside the supported range {range}")]
    OutOfRange { what: &'static str, value: f64, range: &'static str },

    #[error("harmonic series deviates by {deviation:e}, above the truncation bound {bound:e}")]
    TruncationExceeded { deviation: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ensemble member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scan failed: {failed} of {total} work items errored")]
    ScanFailed { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NormDrift { .. }
            | Error::BoundaryProximity { .. }
            | Error::DegeneratePhase { .. }
            | Error::DegenerateCompanion { .. }
            | Error::InsufficientSamples { .. }
            | Error::EigFail { .. }
            | Error::TruncationExceeded { .. }
            | Error::ScanFailed { .. } => true,
            Error::Member { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
