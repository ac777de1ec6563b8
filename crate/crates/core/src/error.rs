use alloc::string::String;

/// Errors reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("potential is not confining: leading coefficient {0} must be positive")]
    NotConfining(f64),
    #[error("no convergence after {iterations} refinements (last estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("spectral window too small: Boltzmann weight of the last level is {weight:e}")]
    Truncation { weight: f64 },
    #[error("internal consistency check failed: {what} (relative discrepancy {discrepancy:e})")]
    Inconsistent {
        what: &'static str,
        discrepancy: f64,
    },
    #[error("no double-well regime: {0}")]
    NoDoubleWell(String),
    #[error("lattice Green's function diverges in dimension {0} (need d >= 3)")]
    Divergent(usize),
    #[error("accuracy target {target:e} not reached (achieved {achieved:e})")]
    Accuracy { target: f64, achieved: f64 },
    #[error("no transition threshold: 8 m theta*^2 J - J(d) = {deficit:e}")]
    NoThreshold { deficit: f64 },
    #[error("stability condition violated: margin {margin:e}")]
    StabilityViolated { margin: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
