//! Adversarial identification of the tip attachment's polynomial stiffness:
//! a generator maps noise to candidate coefficients, a differentiable
//! physics layer turns coefficients into predicted accelerations, and a
//! discriminator judges them against held-out measurements.

pub mod estimate;
pub mod physics;
pub mod train;

pub use estimate::{approach_i, approach_ii, draw_parameter_samples, select_best};
pub use physics::PhysicsLayer;
pub use train::{reconstruction_mse, train, MseObjective};

use crate::nn::{AdamState, Mlp, NnError, RngState};
use crate::numerics::{DenseMatrix, NumericsError};
use crate::simulate::SimulateError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SivaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("generator produced non-finite parameters ({context})")]
    NonFiniteParameters { context: String },
    #[error(
        "non-finite loss at epoch {epoch}; returning checkpoint of epoch {}",
        last_good.epoch
    )]
    NonFiniteLoss {
        epoch: usize,
        last_good: Box<TrainingState>,
    },
    #[error("at least one validation record is required")]
    EmptyValidation,
    #[error("batch size {batch} exceeds the {samples} available time samples")]
    BatchTooLarge { batch: usize, samples: usize },
    #[error("start epoch {start} is not before the {completed} completed epochs")]
    StartEpochBeyondHistory { start: usize, completed: usize },
    #[error("no candidate estimates supplied")]
    NoCandidates,
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Simulation(#[from] SimulateError),
}

/// The five polynomial stiffness coefficients of the tip attachment;
/// k_i multiplies the i-th power of tip displacement, units N/m^i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
}

impl ParameterVector {
    pub const ZERO: Self = Self {
        k1: 0.0,
        k2: 0.0,
        k3: 0.0,
        k4: 0.0,
        k5: 0.0,
    };

    pub fn from_array(k: [f64; 5]) -> Self {
        Self {
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            k5: k[4],
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.k1, self.k2, self.k3, self.k4, self.k5]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Attachment force at tip displacement q_n.
    pub fn tip_force(&self, q_n: f64) -> f64 {
        let k = self.as_array();
        let mut p = 0.0;
        let mut q_pow = 1.0;
        for ki in k {
            q_pow *= q_n;
            p += ki * q_pow;
        }
        p
    }
}

/// Scientific-notation factorization of the coefficients: k_i = a_i · 10^(b_i).
/// The generator emits the ten (a, b) values interleaved as
/// (a1, b1, a2, b2, …, a5, b5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SciNotationOutput {
    pub mantissa: [f64; 5],
    pub exponent: [f64; 5],
}

impl SciNotationOutput {
    pub fn from_network_row(row: &[f64]) -> Self {
        assert_eq!(row.len(), 10, "generator output width must be 10");
        let mut mantissa = [0.0; 5];
        let mut exponent = [0.0; 5];
        for i in 0..5 {
            mantissa[i] = row[2 * i];
            exponent[i] = row[2 * i + 1];
        }
        Self { mantissa, exponent }
    }

    pub fn compose(&self) -> ParameterVector {
        let mut k = [0.0; 5];
        for i in 0..5 {
            k[i] = self.mantissa[i] * 10f64.powf(self.exponent[i]);
        }
        ParameterVector::from_array(k)
    }
}

/// Map a batch of noise vectors through the generator to coefficient sets.
pub fn generate_parameters(
    generator: &Mlp,
    z: &DenseMatrix,
) -> Result<Vec<ParameterVector>, SivaError> {
    if z.cols() != generator.input_width() {
        return Err(SivaError::Dimension {
            expected: generator.input_width(),
            got: z.cols(),
        });
    }
    if generator.output_width() != 10 {
        return Err(SivaError::Dimension {
            expected: 10,
            got: generator.output_width(),
        });
    }
    let (out, _) = generator.forward(z);
    let mut params = Vec::with_capacity(z.rows());
    for r in 0..out.rows() {
        let pv = SciNotationOutput::from_network_row(out.row(r)).compose();
        if !pv.is_finite() {
            return Err(SivaError::NonFiniteParameters {
                context: format!("sample {r} of a standalone batch"),
            });
        }
        params.push(pv);
    }
    Ok(params)
}

/// Per-DOF affine normalization for discriminator inputs, fitted on the
/// pooled held-out measurements (raw accelerations reach thousands of
/// m/s² and would saturate the classifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Pooled column statistics over the given matrices (population std,
    /// floored to keep division safe on constant channels).
    pub fn fit(pooled: &[&DenseMatrix]) -> Self {
        let cols = pooled.first().map(|m| m.cols()).unwrap_or(0);
        let total: usize = pooled.iter().map(|m| m.rows()).sum();
        let mut mean = vec![0.0; cols];
        for m in pooled {
            for r in 0..m.rows() {
                for (c, v) in m.row(r).iter().enumerate() {
                    mean[c] += v;
                }
            }
        }
        for v in &mut mean {
            *v /= total.max(1) as f64;
        }
        let mut var = vec![0.0; cols];
        for m in pooled {
            for r in 0..m.rows() {
                for (c, v) in m.row(r).iter().enumerate() {
                    let d = v - mean[c];
                    var[c] += d * d;
                }
            }
        }
        let std = var
            .iter()
            .map(|v| (v / total.max(1) as f64).sqrt().max(1e-12))
            .collect();
        Self { mean, std }
    }

    pub fn apply_into(&self, raw: &[f64], out: &mut [f64]) {
        for i in 0..raw.len() {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
    }
}

/// Knobs of the adversarial identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the reconstruction term in the generator loss.
    pub gamma: f64,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub noise_dim: usize,
    pub seed: u64,
    /// Epoch-record averaging starts strictly after this epoch.
    pub approach_ii_start_epoch: usize,
    /// Shuffled passes over the training time samples per epoch. One epoch
    /// of updates therefore touches every sample this many times; the
    /// default matches the convergence pace of the reference runs.
    pub passes_per_epoch: usize,
    /// Discriminator input normalization; fitted from the pooled
    /// validation records when absent.
    pub standardization: Option<Standardization>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 500,
            gamma: 1.0,
            generator_lr: 1e-4,
            discriminator_lr: 1e-4,
            noise_dim: 16,
            seed: 42,
            approach_ii_start_epoch: 300,
            passes_per_epoch: 6,
            standardization: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), SivaError> {
        if self.epochs == 0 {
            return Err(SivaError::BadConfig("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(SivaError::BadConfig("batch_size must be >= 1"));
        }
        if !(self.gamma >= 0.0) {
            return Err(SivaError::BadConfig("gamma must be >= 0"));
        }
        if !(self.generator_lr > 0.0 && self.discriminator_lr > 0.0) {
            return Err(SivaError::BadConfig("learning rates must be > 0"));
        }
        if self.passes_per_epoch == 0 {
            return Err(SivaError::BadConfig("passes_per_epoch must be >= 1"));
        }
        if self.noise_dim == 0 {
            return Err(SivaError::BadConfig("noise_dim must be >= 1"));
        }
        Ok(())
    }
}

/// One epoch's mean losses and mean generated coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub l_d: f64,
    pub l_adv: f64,
    pub l_mse: f64,
    pub l_p: f64,
    pub lambda: ParameterVector,
}

/// Complete training outcome: both networks, optimizer and RNG state for
/// exact resumption, and the per-epoch history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingState {
    pub config: TrainingConfig,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub generator_adam: AdamState,
    pub discriminator_adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub records: Vec<EpochRecord>,
    pub rng_state: RngState,
    pub standardization: Standardization,
    pub warnings: Vec<String>,
}

/// How a point estimate was extracted from a trained state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ApproachI,
    #[serde(rename = "approach_ii")]
    ApproachII,
    BestBySimulation,
}

/// A coefficient estimate with its sampling spread and, once ranked, the
/// tip-displacement error of its resimulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub method: EstimateMethod,
    pub values: ParameterVector,
    pub std_dev: ParameterVector,
    pub sample_count: usize,
    #[serde(with = "crate::serde_util::nonfinite_opt")]
    pub resim_mse_m2: Option<f64>,
}
