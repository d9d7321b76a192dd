use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// `lambda * dt` exceeded the single-jump-per-step bound.
    #[error("jump rate times step is {rate_dt} (> {limit}); refine the time grid")]
    RateStepViolation { rate_dt: f64, limit: f64 },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite costate at time index {time_index}, node {node}")]
    NonFiniteCostate { time_index: usize, node: usize },
    #[error("model does not provide analytic control derivatives of drift and diffusion")]
    MissingControlJacobian,
    #[error("explicit step {dt} exceeds the stability limit {limit}")]
    StabilityViolation { dt: f64, limit: f64 },
    #[error("optimization did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
