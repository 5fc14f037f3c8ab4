use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("time grid is empty or not strictly increasing from 0")]
    BadGrid,

    #[error("records do not share a time grid")]
    GridMismatch,

    #[error("need at least {needed} trajectories, got {got}")]
    TooFewTrajectories { needed: usize, got: usize },

    #[error("jump probability {p:.3} per step at t = {t:.4} exceeds 0.1; reduce dt")]
    StepTooLarge { p: f64, t: f64 },

    #[error("state norm collapsed to {norm:e}; reduce dt")]
    NormCollapse { norm: f64 },

    #[error("waiting-time root finder did not converge for u = {u} (bracket [{lo}, {hi}])")]
    RootFinding { u: f64, lo: f64, hi: f64 },

    #[error("null probability underflows at t = {t}; kernel usable for t < {usable:.1}")]
    Underflow { t: f64, usable: f64 },

    #[error("window holds {periods:.2} oscillation periods, need at least 4")]
    WindowTooShort { periods: f64 },

    #[error("grid spacing {h} too coarse, must be <= {max}")]
    GridTooCoarse { h: f64, max: f64 },

    #[error("polynomial division left remainder {remainder:e} in equation for {moment}")]
    NonzeroRemainder { moment: String, remainder: f64 },

    #[error("diffusion term has imaginary part {imag:e} in equation for {moment}")]
    ComplexDiffusion { moment: String, imag: f64 },

    #[error("timestamp series `{0}` is empty")]
    EmptySeries(String),

    #[error("{0}")]
    Parse(String),

    #[error("fit did not converge after {restarts} restarts (best chi2 = {chi2:e})")]
    FitFailed { restarts: usize, chi2: f64, best: Vec<f64> },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
