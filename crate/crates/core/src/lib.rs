//! Identification of a cantilever beam's nonlinear end attachment from
//! transient vibration data: finite-element modeling, Guyan reduction,
//! adversarial parameter estimation with a differentiable physics layer,
//! a sparse-regression baseline, and uncertainty quantification.

pub mod beam;
pub mod cli;
pub mod nn;
pub mod numerics;
pub mod reduction;
pub(crate) mod serde_util;
pub mod simulate;
pub mod sindy;
pub mod spectral;
pub mod siva;
pub mod uq;
