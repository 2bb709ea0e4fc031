//! Training-objective kernels with hand-derived gradients.
//!
//! Everything here is a pure function of its inputs, so any trainer can call
//! the kernels directly. [`gradcheck`] verifies each analytic gradient
//! against central finite differences.

mod balanced;
mod discriminator;
pub mod gradcheck;
mod sampler;
mod wgan;

use thiserror::Error;

pub use balanced::{cbl_loss, class_weights, ClassWeights};
pub use discriminator::{
    discriminator_eval, Discriminator, DiscriminatorEval, DiscriminatorGrads,
    DEFAULT_HIDDEN_WIDTH, DEFAULT_LEAKY_SLOPE, FEATURE_DIM,
};
pub use sampler::{sample_hard_false_positives, SamplerParams};
pub use wgan::{wgan_gp_gradients, wgan_gp_losses, WganGradients, WganLosses, DEFAULT_LAMBDA_GP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

impl From<crate::grid::GridError> for LossError {
    fn from(e: crate::grid::GridError) -> Self {
        LossError::ShapeMismatch(e.to_string())
    }
}
