//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short for truncation lag (need > {need}, got {got})")]
    SeriesTooShortForFilter { need: usize, got: usize },

    #[error("series too short for Whittle estimation (need >= {need}, got {got})")]
    SeriesTooShortForWhittle { need: usize, got: usize },

    #[error("unstable pole: modulus {0} >= 1")]
    UnstablePole(f64),

    #[error("nonstationary process: spectral radius {0} too close to the unit circle")]
    Nonstationary(f64),

    #[error("Lyapunov: unstable transition matrix (spectral radius {0})")]
    LyapunovUnstable(f64),

    #[error("Lyapunov: no convergence after {0} doublings")]
    LyapunovNoConvergence(usize),

    #[error("DARE: no convergence after {0} iterations")]
    DareNoConvergence(usize),

    #[error("DARE: invalid solution ({0})")]
    DareInvalidSolution(String),

    #[error("degenerate innovation variance ({0})")]
    DegenerateInnovationVariance(f64),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("periodogram degenerate: series has zero variance")]
    DegeneratePeriodogram,

    #[error("filter leading tap zero after stripping")]
    FilterLeadingTapZero,

    #[error("linear-phase design requires even order (got {0})")]
    OddFilterOrder(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("residual check failed: {context} relative residual {residual:.3e} exceeds {limit:.1e}")]
    ResidualCheck {
        context: &'static str,
        residual: f64,
        limit: f64,
    },

    #[error("at scale tau={tau}: {source}")]
    AtScale {
        tau: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_scale(self, tau: usize) -> Error {
        Error::AtScale {
            tau,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
