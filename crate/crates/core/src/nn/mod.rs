//! Minimal neural-network toolkit: dense MLPs with LeakyReLU hidden
//! layers, reverse-mode gradients, Adam, stable classification losses,
//! and a restartable deterministic random stream.

pub mod adam;
pub mod loss;
pub mod mlp;
pub mod rng;

pub use adam::{adam_step, AdamState};
pub use loss::{bce_with_logits, loss_bce, loss_mse, softplus};
pub use mlp::{init_mlp, sigmoid, Gradients, ForwardCache, Mlp, OutputActivation};
pub use rng::{RngState, RngStream, RNG_ALGORITHM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network architecture: {0}")]
    BadArchitecture(&'static str),
    #[error("random stream state cannot be restored: {0}")]
    BadRngState(String),
}
