use thiserror::Error;

/// Errors raised by the sampling, stretch and codec layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("region has zero proposal mass: ({lo}, {hi})")]
    DegenerateRegion { lo: f64, hi: f64 },

    #[error("ODE integration failed near t = {last_t}: {reason}")]
    Integration { last_t: f64, reason: String },

    #[error("step budget of {budget} exhausted after {steps} candidates")]
    Budget { budget: u64, steps: u64 },

    #[error("survival mass underflow at t = {t}")]
    Underflow { t: f64 },

    #[error("rejection bound {bound} is below the density ratio supremum {r_star}")]
    InvalidBound { bound: f64, r_star: f64 },

    #[error("bitstream truncated at bit {0}")]
    Truncated(usize),

    #[error("malformed bitstream: {0}")]
    Malformed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("output error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
