use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("truncation overflow: population {population:e} on top Fock level {level} exceeds guard {guard:e}")]
    TruncationOverflow {
        level: usize,
        population: f64,
        guard: f64,
    },

    #[error("trace drift {drift:e} at t = {t} exceeds tolerance {tolerance:e}")]
    TraceDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("norm drift {drift:e} at t = {t} exceeds tolerance {tolerance:e}")]
    NormDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("jump probability {probability} per step exceeds {limit}; reduce dt")]
    StepTooLarge { probability: f64, limit: f64 },

    #[error("dark state undefined at t = {t}: both pulses vanish")]
    DegenerateDarkState { t: f64 },

    #[error("time {t} outside the crossing window [0, {t_cross}]")]
    OutOfWindow { t: f64, t_cross: f64 },
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TruncationOverflow { .. }
                | Error::TraceDrift { .. }
                | Error::NormDrift { .. }
                | Error::NonFinite { .. }
                | Error::StepTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
