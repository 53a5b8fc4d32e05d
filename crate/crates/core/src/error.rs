use alloc::boxed::Box;
use alloc::string::String;

use crate::autodiff::AdError;
use crate::mechanics::MechError;

/// Crate-wide error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Mech(#[from] MechError),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("step {step} failed: {source}")]
    Rollout { step: usize, source: Box<Error> },
    #[error("{model} model produced a non-finite prediction")]
    ModelNonFinite { model: &'static str },
    #[error("training diverged at epoch {epoch}, batch {batch} (loss = {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("trajectory optimization did not reach defect tolerance: max defect {defect:e} after {iterations} outer iterations")]
    Infeasible { best: Box<crate::trajopt::Trajectory>, defect: f64, iterations: usize },
    #[error("Riccati step {step}: R + B'PB is not positive definite")]
    Riccati { step: usize },
    #[error("closed-loop rollout diverged at step {step}")]
    TrackingDiverged { step: usize },
    #[error("all {} grid points diverged: {}", .0.len(), .0.join("; "))]
    AllDiverged(alloc::vec::Vec<String>),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
