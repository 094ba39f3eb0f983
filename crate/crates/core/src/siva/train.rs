use super::physics::PhysicsLayer;
use super::{
    EpochRecord, ParameterVector, SciNotationOutput, SivaError, Standardization, TrainingConfig,
    TrainingState,
};
use crate::nn::{
    adam_step, bce_with_logits, init_mlp, AdamState, ForwardCache, Gradients, Mlp,
    OutputActivation, RngStream,
};
use crate::numerics::DenseMatrix;
use crate::reduction::ReducedModel;
use crate::simulate::{half_sine, TrajectorySet};

const LN_10: f64 = std::f64::consts::LN_10;

/// Position of a full-model DOF inside the retained master set.
fn reduced_force_index(reduced: &ReducedModel, full_dof: usize) -> Result<usize, SivaError> {
    reduced
        .master_dofs
        .iter()
        .position(|&d| d == full_dof)
        .ok_or(SivaError::BadConfig(
            "forcing DOF is not a retained master DOF",
        ))
}

fn check_record(reduced: &ReducedModel, set: &TrajectorySet) -> Result<(), SivaError> {
    if set.dof_count() != reduced.dim() {
        return Err(SivaError::Dimension {
            expected: reduced.dim(),
            got: set.dof_count(),
        });
    }
    if set.is_empty() {
        return Err(SivaError::BadConfig("empty trajectory record"));
    }
    Ok(())
}

/// The reconstruction objective on one measured record, exploiting the
/// affine structure of the predicted acceleration:
/// q̈(λ, t) = q̈_lin(t) + s · p(λ, q_tip(t)) with p the tip polynomial.
/// The mean squared error against the measured accelerations and its
/// exact λ-gradient then need only low-order moments of the record.
#[derive(Debug, Clone)]
pub struct MseObjective {
    dim: usize,
    /// a_t = s · (q̈_meas − q̈_lin) per sample.
    resid_proj: Vec<f64>,
    /// R_t = ‖q̈_meas − q̈_lin‖² per sample.
    resid_norm2: Vec<f64>,
    /// q_tip^1 … q_tip^10 per sample (highest power needed by p²).
    tip_pow: Vec<[f64; 10]>,
    /// c = ‖s‖².
    s_norm2: f64,
}

impl MseObjective {
    pub fn new(reduced: &ReducedModel, record: &TrajectorySet) -> Result<Self, SivaError> {
        let physics = PhysicsLayer::new(reduced)?;
        Self::with_physics(&physics, reduced, record)
    }

    fn with_physics(
        physics: &PhysicsLayer,
        reduced: &ReducedModel,
        record: &TrajectorySet,
    ) -> Result<Self, SivaError> {
        check_record(reduced, record)?;
        let dim = reduced.dim();
        let app = reduced_force_index(reduced, record.forcing.application_dof)?;
        let s = physics.tip_sensitivity().to_vec();
        let s_norm2 = s.iter().map(|v| v * v).sum();
        let n = record.len();
        let mut resid_proj = Vec::with_capacity(n);
        let mut resid_norm2 = Vec::with_capacity(n);
        let mut tip_pow = Vec::with_capacity(n);
        let mut f = vec![0.0; dim];
        for t in 0..n {
            f[app] = half_sine(&record.forcing, record.times_s[t]);
            let lin = physics.linear_accel(record.q.row(t), record.qd.row(t), &f)?;
            let meas = record.qdd.row(t);
            let mut proj = 0.0;
            let mut norm2 = 0.0;
            for j in 0..dim {
                let r = meas[j] - lin[j];
                proj += s[j] * r;
                norm2 += r * r;
            }
            resid_proj.push(proj);
            resid_norm2.push(norm2);
            let q_tip = record.q.row(t)[reduced.tip_index];
            let mut pows = [0.0; 10];
            let mut p = 1.0;
            for pw in &mut pows {
                p *= q_tip;
                *pw = p;
            }
            tip_pow.push(pows);
            f[app] = 0.0;
        }
        Ok(Self {
            dim,
            resid_proj,
            resid_norm2,
            tip_pow,
            s_norm2,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.resid_proj.len()
    }

    /// Moments of a time-index subset: (Σ R_t, Σ a_t q^m for m = 1..5,
    /// Σ q^p for p = 2..10 stored at index p).
    fn moments(&self, chunk: &[usize]) -> (f64, [f64; 5], [f64; 11]) {
        let mut sum_r = 0.0;
        let mut u = [0.0; 5];
        let mut pw = [0.0; 11];
        for &t in chunk {
            sum_r += self.resid_norm2[t];
            let pows = &self.tip_pow[t];
            let a = self.resid_proj[t];
            for m in 0..5 {
                u[m] += a * pows[m];
            }
            for p in 2..=10 {
                pw[p] += pows[p - 1];
            }
        }
        (sum_r, u, pw)
    }

    /// Mean (over samples and entries) squared acceleration error of each
    /// candidate against the chunk, averaged over candidates, plus the
    /// gradient of that average with respect to each candidate's k's.
    pub fn loss_and_k_grads(
        &self,
        candidates: &[ParameterVector],
        chunk: &[usize],
    ) -> (f64, Vec<[f64; 5]>) {
        assert!(!candidates.is_empty() && !chunk.is_empty());
        let (sum_r, u, pw) = self.moments(chunk);
        let c = self.s_norm2;
        let denom = (chunk.len() * self.dim) as f64;
        let n_cand = candidates.len() as f64;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(candidates.len());
        for cand in candidates {
            let k = cand.as_array();
            let mut ku = 0.0;
            let mut kqk = 0.0;
            let mut qk = [0.0; 5];
            for m in 0..5 {
                ku += k[m] * u[m];
                let mut acc = 0.0;
                for n in 0..5 {
                    acc += pw[m + n + 2] * k[n];
                }
                qk[m] = acc;
                kqk += k[m] * acc;
            }
            total += (sum_r - 2.0 * ku + c * kqk) / denom;
            let mut g = [0.0; 5];
            for m in 0..5 {
                g[m] = (-2.0 * u[m] + 2.0 * c * qk[m]) / denom / n_cand;
            }
            grads.push(g);
        }
        (total / n_cand, grads)
    }

    pub fn loss(&self, candidates: &[ParameterVector], chunk: &[usize]) -> f64 {
        self.loss_and_k_grads(candidates, chunk).0
    }

    /// Full-record reconstruction error of a single candidate.
    pub fn full_loss(&self, candidate: &ParameterVector) -> f64 {
        let all: Vec<usize> = (0..self.sample_count()).collect();
        self.loss(&[*candidate], &all)
    }

    /// Reconstruction loss of a generator batch together with the
    /// gradients of that loss with respect to every generator parameter —
    /// the full noise → coefficients → physics → error chain.
    pub fn generator_loss_and_grads(
        &self,
        generator: &Mlp,
        z: &DenseMatrix,
        chunk: &[usize],
    ) -> Result<(f64, Gradients), SivaError> {
        let (ks, scis, cache) = forward_parameters(generator, z, "frozen batch")?;
        let (loss, k_grads) = self.loss_and_k_grads(&ks, chunk);
        let out_grad = k_grads_to_output_grad(&scis, &ks, &k_grads);
        let (grads, _) = generator.backward(&cache, &out_grad);
        Ok((loss, grads))
    }
}

/// Reconstruction error of one coefficient set over a full record — the
/// scale-sanity and reporting metric.
pub fn reconstruction_mse(
    reduced: &ReducedModel,
    record: &TrajectorySet,
    lambda: &ParameterVector,
) -> Result<f64, SivaError> {
    Ok(MseObjective::new(reduced, record)?.full_loss(lambda))
}

/// Generator forward pass plus scientific-notation composition.
fn forward_parameters(
    generator: &Mlp,
    z: &DenseMatrix,
    context: &str,
) -> Result<(Vec<ParameterVector>, Vec<SciNotationOutput>, ForwardCache), SivaError> {
    let (out, cache) = generator.forward(z);
    let mut ks = Vec::with_capacity(out.rows());
    let mut scis = Vec::with_capacity(out.rows());
    for r in 0..out.rows() {
        let sci = SciNotationOutput::from_network_row(out.row(r));
        let k = sci.compose();
        if !k.is_finite() {
            return Err(SivaError::NonFiniteParameters {
                context: context.to_string(),
            });
        }
        ks.push(k);
        scis.push(sci);
    }
    Ok((ks, scis, cache))
}

/// Chain rule through k = a·10^b: ∂k/∂a = 10^b, ∂k/∂b = k·ln 10.
fn k_grads_to_output_grad(
    scis: &[SciNotationOutput],
    ks: &[ParameterVector],
    k_grads: &[[f64; 5]],
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(scis.len(), 10);
    for i in 0..scis.len() {
        let k = ks[i].as_array();
        for m in 0..5 {
            let gk = k_grads[i][m];
            out[(i, 2 * m)] = gk * 10f64.powf(scis[i].exponent[m]);
            out[(i, 2 * m + 1)] = gk * k[m] * LN_10;
        }
    }
    out
}

fn gather_rows(source: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows.len(), source.cols());
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(source.row(r));
    }
    out
}

/// Pooled held-out data prepared for the adversarial path: standardized
/// real acceleration rows, per-instant linear accelerations and tip
/// monomials for assembling predicted rows.
struct ValidationPool {
    real_std: DenseMatrix,
    lin: DenseMatrix,
    tip_pow: Vec<[f64; 5]>,
    len: usize,
}

fn build_validation_pool(
    physics: &PhysicsLayer,
    reduced: &ReducedModel,
    validation: &[TrajectorySet],
    standardization: Option<&Standardization>,
) -> Result<(ValidationPool, Standardization), SivaError> {
    let dim = reduced.dim();
    let total: usize = validation.iter().map(|v| v.len()).sum();
    let mut real = DenseMatrix::zeros(total, dim);
    let mut lin = DenseMatrix::zeros(total, dim);
    let mut tip_pow = Vec::with_capacity(total);
    let mut row = 0;
    for set in validation {
        check_record(reduced, set)?;
        let app = reduced_force_index(reduced, set.forcing.application_dof)?;
        let mut f = vec![0.0; dim];
        for t in 0..set.len() {
            f[app] = half_sine(&set.forcing, set.times_s[t]);
            let lin_t = physics.linear_accel(set.q.row(t), set.qd.row(t), &f)?;
            lin.row_mut(row).copy_from_slice(&lin_t);
            real.row_mut(row).copy_from_slice(set.qdd.row(t));
            let q_tip = set.q.row(t)[reduced.tip_index];
            let mut pows = [0.0; 5];
            let mut p = 1.0;
            for pw in &mut pows {
                p *= q_tip;
                *pw = p;
            }
            tip_pow.push(pows);
            f[app] = 0.0;
            row += 1;
        }
    }
    let stats = match standardization {
        Some(s) => s.clone(),
        None => Standardization::fit(&[&real]),
    };
    let mut real_std = DenseMatrix::zeros(total, dim);
    let mut buf = vec![0.0; dim];
    for r in 0..total {
        stats.apply_into(real.row(r), &mut buf);
        real_std.row_mut(r).copy_from_slice(&buf);
    }
    Ok((
        ValidationPool {
            real_std,
            lin,
            tip_pow,
            len: total,
        },
        stats,
    ))
}

struct Engine {
    batch: usize,
    noise_dim: usize,
    gamma: f64,
    generator: Mlp,
    discriminator: Mlp,
    generator_adam: AdamState,
    discriminator_adam: AdamState,
    rng: RngStream,
    stats: Standardization,
    s: Vec<f64>,
    objective: MseObjective,
    pool: ValidationPool,
}

impl Engine {
    fn sample_parameters(
        &mut self,
        epoch: usize,
    ) -> Result<(Vec<ParameterVector>, Vec<SciNotationOutput>, ForwardCache), SivaError> {
        let mut z = DenseMatrix::zeros(self.batch, self.noise_dim);
        self.rng.fill_normal(z.as_mut_slice());
        forward_parameters(&self.generator, &z, &format!("epoch {epoch}"))
    }

    fn sample_instants(&mut self) -> Vec<usize> {
        (0..self.batch)
            .map(|_| self.rng.below(self.pool.len))
            .collect()
    }

    /// Predicted accelerations at held-out instants, standardized for the
    /// classifier: row i pairs candidate i with instant i.
    fn predicted_inputs(&self, ks: &[ParameterVector], instants: &[usize]) -> DenseMatrix {
        let dim = self.pool.lin.cols();
        let mut out = DenseMatrix::zeros(ks.len(), dim);
        let mut raw = vec![0.0; dim];
        for (i, (k, &t)) in ks.iter().zip(instants).enumerate() {
            let pows = &self.pool.tip_pow[t];
            let ka = k.as_array();
            let mut p = 0.0;
            for m in 0..5 {
                p += ka[m] * pows[m];
            }
            let lin = self.pool.lin.row(t);
            for j in 0..dim {
                raw[j] = lin[j] + self.s[j] * p;
            }
            self.stats.apply_into(&raw, out.row_mut(i));
        }
        out
    }

    /// Classifier update: real held-out rows against generated rows,
    /// summed per-class cross-entropies.
    fn discriminator_step(&mut self, epoch: usize) -> Result<f64, SivaError> {
        let (ks, _, _) = self.sample_parameters(epoch)?;
        let instants = self.sample_instants();
        let fake = self.predicted_inputs(&ks, &instants);
        let real = gather_rows(&self.pool.real_std, &instants);

        let ones = vec![1.0; self.batch];
        let zeros = vec![0.0; self.batch];
        let (real_logits, real_cache) = self.discriminator.forward(&real);
        let (l_real, g_real) = bce_with_logits(&real_logits, &ones);
        let (mut grads, _) = self.discriminator.backward_from_logits(&real_cache, &g_real);
        let (fake_logits, fake_cache) = self.discriminator.forward(&fake);
        let (l_fake, g_fake) = bce_with_logits(&fake_logits, &zeros);
        let (grads_fake, _) = self.discriminator.backward_from_logits(&fake_cache, &g_fake);
        grads.add(&grads_fake);
        adam_step(
            &mut self.discriminator,
            &grads,
            &mut self.discriminator_adam,
        );
        Ok(l_real + l_fake)
    }

    /// Generator update on adversarial + weighted reconstruction loss.
    /// Returns (adversarial loss, reconstruction loss, per-batch k sums).
    fn generator_step(
        &mut self,
        chunk: &[usize],
        epoch: usize,
    ) -> Result<(f64, f64, [f64; 5]), SivaError> {
        let (ks, scis, gen_cache) = self.sample_parameters(epoch)?;
        let instants = self.sample_instants();
        let fake = self.predicted_inputs(&ks, &instants);

        let ones = vec![1.0; self.batch];
        let (logits, disc_cache) = self.discriminator.forward(&fake);
        let (l_adv, logit_grad) = bce_with_logits(&logits, &ones);
        let (_, input_grad) = self
            .discriminator
            .backward_from_logits(&disc_cache, &logit_grad);

        let (l_mse, mse_grads) = self.objective.loss_and_k_grads(&ks, chunk);

        let dim = self.pool.lin.cols();
        let mut k_grads = mse_grads;
        let mut k_sums = [0.0; 5];
        for i in 0..self.batch {
            // Through the standardized classifier input back to raw
            // acceleration, then onto the tip-force channel.
            let mut proj = 0.0;
            for j in 0..dim {
                proj += input_grad[(i, j)] / self.stats.std[j] * self.s[j];
            }
            let pows = &self.pool.tip_pow[instants[i]];
            let k = ks[i].as_array();
            for m in 0..5 {
                k_grads[i][m] = proj * pows[m] + self.gamma * k_grads[i][m];
                k_sums[m] += k[m];
            }
        }
        let out_grad = k_grads_to_output_grad(&scis, &ks, &k_grads);
        let (grads, _) = self.generator.backward(&gen_cache, &out_grad);
        adam_step(&mut self.generator, &grads, &mut self.generator_adam);
        Ok((l_adv, l_mse, k_sums))
    }
}

/// Two-step adversarial identification. Each epoch makes
/// `passes_per_epoch` shuffled passes over the training record in
/// `batch_size` chunks; every chunk drives one classifier update (fresh
/// noise, fresh held-out instants) followed by one generator update (again
/// fresh), with the chunk supplying the reconstruction target. Draw order
/// is fixed for reproducibility: a shuffle at the start of each pass, then
/// per step classifier noise, classifier instants, generator noise,
/// generator instants.
pub fn train(
    config: &TrainingConfig,
    reduced: &ReducedModel,
    training: &TrajectorySet,
    validation: &[TrajectorySet],
) -> Result<TrainingState, SivaError> {
    config.validate()?;
    if validation.is_empty() {
        return Err(SivaError::EmptyValidation);
    }
    check_record(reduced, training)?;
    if config.batch_size > training.len() {
        return Err(SivaError::BatchTooLarge {
            batch: config.batch_size,
            samples: training.len(),
        });
    }

    let physics = PhysicsLayer::new(reduced)?;
    let objective = MseObjective::with_physics(&physics, reduced, training)?;
    let (pool, stats) =
        build_validation_pool(&physics, reduced, validation, config.standardization.as_ref())?;

    let mut rng = RngStream::new(config.seed);
    let generator = init_mlp(
        &[config.noise_dim, 64, 32, 16, 10],
        OutputActivation::Linear,
        &mut rng,
    )?;
    let discriminator = init_mlp(
        &[reduced.dim(), 64, 32, 1],
        OutputActivation::Sigmoid,
        &mut rng,
    )?;
    let generator_adam = AdamState::new(&generator, config.generator_lr);
    let discriminator_adam = AdamState::new(&discriminator, config.discriminator_lr);

    let mut engine = Engine {
        batch: config.batch_size,
        noise_dim: config.noise_dim,
        gamma: config.gamma,
        generator,
        discriminator,
        generator_adam,
        discriminator_adam,
        rng,
        stats,
        s: physics.tip_sensitivity().to_vec(),
        objective,
        pool,
    };

    let snapshot = |engine: &Engine, records: &[EpochRecord], warnings: &[String]| TrainingState {
        config: config.clone(),
        generator: engine.generator.clone(),
        discriminator: engine.discriminator.clone(),
        generator_adam: engine.generator_adam.clone(),
        discriminator_adam: engine.discriminator_adam.clone(),
        epoch: records.len(),
        records: records.to_vec(),
        rng_state: engine.rng.state(),
        standardization: engine.stats.clone(),
        warnings: warnings.to_vec(),
    };

    let mut records: Vec<EpochRecord> = Vec::with_capacity(config.epochs);
    let mut warnings: Vec<String> = Vec::new();
    let mut last_good = snapshot(&engine, &records, &warnings);
    let mut collapse_streak = 0usize;
    let mut collapse_reported = false;
    let mut order: Vec<usize> = (0..training.len()).collect();

    for epoch in 1..=config.epochs {
        let mut sum_d = 0.0;
        let mut sum_adv = 0.0;
        let mut sum_mse = 0.0;
        let mut steps = 0usize;
        let mut k_sums = [0.0; 5];
        let mut k_count = 0usize;

        for _pass in 0..config.passes_per_epoch {
            engine.rng.shuffle(&mut order);
            for chunk in order.chunks(config.batch_size) {
                let l_d = engine.discriminator_step(epoch)?;
                let (l_adv, l_mse, step_k) = engine.generator_step(chunk, epoch)?;
                if !(l_d.is_finite() && l_adv.is_finite() && l_mse.is_finite()) {
                    return Err(SivaError::NonFiniteLoss {
                        epoch,
                        last_good: Box::new(last_good),
                    });
                }
                sum_d += l_d;
                sum_adv += l_adv;
                sum_mse += l_mse;
                steps += 1;
                for m in 0..5 {
                    k_sums[m] += step_k[m];
                }
                k_count += config.batch_size;
            }
        }

        let n = steps as f64;
        let l_d = sum_d / n;
        let l_adv = sum_adv / n;
        let l_mse = sum_mse / n;
        let l_p = l_adv + config.gamma * l_mse;
        let mut lambda = [0.0; 5];
        for m in 0..5 {
            lambda[m] = k_sums[m] / k_count as f64;
        }
        records.push(EpochRecord {
            epoch,
            l_d,
            l_adv,
            l_mse,
            l_p,
            lambda: ParameterVector::from_array(lambda),
        });

        if l_d < 0.01 {
            collapse_streak += 1;
            if collapse_streak >= 50 && !collapse_reported {
                warnings.push(format!(
                    "discriminator loss below 0.01 for 50 consecutive epochs \
                     (first reached at epoch {epoch}); the classifier has \
                     collapsed and the adversarial term is uninformative"
                ));
                collapse_reported = true;
            }
        } else {
            collapse_streak = 0;
        }

        last_good = snapshot(&engine, &records, &warnings);
    }

    Ok(last_good)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{DatasetLabel, ForcingSpec};

    /// Small two-mass chain with the "attachment" on the second mass.
    fn toy_reduced() -> ReducedModel {
        ReducedModel {
            m_r: DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]),
            c_r: DenseMatrix::from_rows(&[vec![0.04, 0.0], vec![0.0, 0.02]]),
            k_r: DenseMatrix::from_rows(&[vec![8.0, -4.0], vec![-4.0, 4.0]]),
            master_dofs: vec![0, 1],
            tip_index: 1,
        }
    }

    fn toy_forcing() -> ForcingSpec {
        ForcingSpec {
            amplitude_n: 1.0,
            duration_s: 0.3,
            application_dof: 1,
            start_time_s: 0.0,
        }
    }

    /// Synthetic record whose accelerations satisfy the model equation
    /// exactly for the given truth coefficients: states are arbitrary
    /// smooth signals, accelerations are computed from them.
    fn toy_record(truth: &ParameterVector, n: usize, label: DatasetLabel) -> TrajectorySet {
        let reduced = toy_reduced();
        let physics = PhysicsLayer::new(&reduced).unwrap();
        let forcing = toy_forcing();
        let dt = 0.01;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let mut q = DenseMatrix::zeros(n, 2);
        let mut qd = DenseMatrix::zeros(n, 2);
        let mut qdd = DenseMatrix::zeros(n, 2);
        for (t, &time) in times.iter().enumerate() {
            let q_row = [0.3 * (2.0 * time).sin(), 0.4 * (3.1 * time).cos()];
            let qd_row = [0.6 * (2.0 * time).cos(), -1.24 * (3.1 * time).sin()];
            let mut f = [0.0, 0.0];
            f[1] = half_sine(&forcing, time);
            let acc = physics.physics_accel(truth, &q_row, &qd_row, &f).unwrap();
            for j in 0..2 {
                q[(t, j)] = q_row[j];
                qd[(t, j)] = qd_row[j];
                qdd[(t, j)] = acc[j];
            }
        }
        TrajectorySet {
            times_s: times,
            q,
            qd,
            qdd,
            forcing,
            label,
        }
    }

    fn toy_truth() -> ParameterVector {
        ParameterVector::from_array([5.0, 0.0, 12.0, 0.0, 0.0])
    }

    fn tiny_config(epochs: usize) -> TrainingConfig {
        TrainingConfig {
            epochs,
            batch_size: 16,
            noise_dim: 4,
            passes_per_epoch: 1,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn affine_decomposition_matches_direct_physics() {
        let reduced = toy_reduced();
        let physics = PhysicsLayer::new(&reduced).unwrap();
        let record = toy_record(&toy_truth(), 40, DatasetLabel::Training);
        let lambda = ParameterVector::from_array([1.5, -0.3, 7.0, 0.2, -0.8]);
        let s = physics.tip_sensitivity();
        let app = 1;
        for t in [0usize, 7, 23, 39] {
            let mut f = [0.0, 0.0];
            f[app] = half_sine(&record.forcing, record.times_s[t]);
            let lin = physics
                .linear_accel(record.q.row(t), record.qd.row(t), &f)
                .unwrap();
            let direct = physics
                .physics_accel(&lambda, record.q.row(t), record.qd.row(t), &f)
                .unwrap();
            let p = lambda.tip_force(record.q.row(t)[1]);
            for j in 0..2 {
                let affine = lin[j] + s[j] * p;
                assert!(
                    (affine - direct[j]).abs() < 1e-12 * direct[j].abs().max(1.0),
                    "t={t} j={j}: {affine} vs {}",
                    direct[j]
                );
            }
        }
    }

    #[test]
    fn objective_is_zero_at_truth_and_large_at_zero() {
        let reduced = toy_reduced();
        let record = toy_record(&toy_truth(), 120, DatasetLabel::Training);
        let objective = MseObjective::new(&reduced, &record).unwrap();
        let at_truth = objective.full_loss(&toy_truth());
        let at_zero = objective.full_loss(&ParameterVector::ZERO);
        // The quadratic form cancels to float rounding at the optimum.
        assert!(at_truth < 1e-12 * at_zero, "truth loss {at_truth}");
        assert!(at_zero > 1e-2, "zero loss {at_zero}");
    }

    #[test]
    fn objective_matches_brute_force_mse() {
        let reduced = toy_reduced();
        let physics = PhysicsLayer::new(&reduced).unwrap();
        let record = toy_record(&toy_truth(), 60, DatasetLabel::Training);
        let objective = MseObjective::new(&reduced, &record).unwrap();
        let lambda = ParameterVector::from_array([2.0, 1.0, -3.0, 0.5, 4.0]);
        let chunk: Vec<usize> = vec![3, 17, 41, 55];
        let fast = objective.loss(&[lambda], &chunk);
        let mut brute = 0.0;
        for &t in &chunk {
            let mut f = [0.0, 0.0];
            f[1] = half_sine(&record.forcing, record.times_s[t]);
            let pred = physics
                .physics_accel(&lambda, record.q.row(t), record.qd.row(t), &f)
                .unwrap();
            for j in 0..2 {
                let d = pred[j] - record.qdd[(t, j)];
                brute += d * d;
            }
        }
        brute /= (chunk.len() * 2) as f64;
        assert!(
            (fast - brute).abs() < 1e-10 * brute.abs().max(1.0),
            "{fast} vs {brute}"
        );
    }

    #[test]
    fn end_to_end_generator_gradient_matches_finite_differences() {
        let reduced = toy_reduced();
        let record = toy_record(&toy_truth(), 80, DatasetLabel::Training);
        let objective = MseObjective::new(&reduced, &record).unwrap();
        let mut rng = RngStream::new(11);
        let mut generator = init_mlp(&[4, 8, 6, 10], OutputActivation::Linear, &mut rng).unwrap();
        let mut z = DenseMatrix::zeros(6, 4);
        rng.fill_normal(z.as_mut_slice());
        let chunk: Vec<usize> = (0..40).collect();

        let (_, grads) = objective
            .generator_loss_and_grads(&generator, &z, &chunk)
            .unwrap();

        for probe in 0..25 {
            let layer = probe % generator.weights.len();
            let nw = generator.weights[layer].rows() * generator.weights[layer].cols();
            let idx = (probe * 131) % nw;
            let step = 1e-6;
            let orig = generator.weights[layer].as_slice()[idx];
            generator.weights[layer].as_mut_slice()[idx] = orig + step;
            let (lp, _) = objective
                .generator_loss_and_grads(&generator, &z, &chunk)
                .unwrap();
            generator.weights[layer].as_mut_slice()[idx] = orig - step;
            let (lm, _) = objective
                .generator_loss_and_grads(&generator, &z, &chunk)
                .unwrap();
            generator.weights[layer].as_mut_slice()[idx] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            let analytic = grads.weights[layer].as_slice()[idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-10);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "layer {layer} idx {idx}: {analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let cfg = tiny_config(3);
        let a = train(&cfg, &reduced, &training, &validation).unwrap();
        let b = train(&cfg, &reduced, &training, &validation).unwrap();
        assert_eq!(a.records.len(), 3);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.l_d.to_bits(), rb.l_d.to_bits());
            assert_eq!(ra.l_adv.to_bits(), rb.l_adv.to_bits());
            assert_eq!(ra.l_mse.to_bits(), rb.l_mse.to_bits());
            assert_eq!(ra.lambda.k3.to_bits(), rb.lambda.k3.to_bits());
        }
        assert_eq!(a.rng_state, b.rng_state);
    }

    #[test]
    fn recorded_composite_loss_satisfies_identity() {
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let mut cfg = tiny_config(4);
        cfg.gamma = 0.37;
        let state = train(&cfg, &reduced, &training, &validation).unwrap();
        for r in &state.records {
            assert!((r.l_p - (r.l_adv + cfg.gamma * r.l_mse)).abs() <= 1e-12);
        }
    }

    #[test]
    fn poisoned_data_aborts_with_checkpoint() {
        let reduced = toy_reduced();
        let mut training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        training.qdd[(50, 0)] = f64::NAN;
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let cfg = tiny_config(3);
        match train(&cfg, &reduced, &training, &validation) {
            Err(SivaError::NonFiniteLoss { epoch, last_good }) => {
                assert_eq!(epoch, 1);
                assert_eq!(last_good.epoch, 0);
                assert!(last_good.records.is_empty());
            }
            other => panic!("expected non-finite loss abort, got {other:?}"),
        }
    }

    #[test]
    fn runaway_learning_rate_reports_non_finite_parameters() {
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let mut cfg = tiny_config(20);
        cfg.generator_lr = 1e3;
        match train(&cfg, &reduced, &training, &validation) {
            Err(SivaError::NonFiniteParameters { context }) => {
                assert!(context.contains("epoch"));
            }
            Ok(state) => {
                // Exponents capped below overflow by sheer luck — accept,
                // but the run must still have finite records throughout.
                assert!(state.records.iter().all(|r| r.l_mse.is_finite()));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn batch_larger_than_record_is_rejected() {
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 10, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 10, DatasetLabel::Validation)];
        let cfg = tiny_config(1);
        assert!(matches!(
            train(&cfg, &reduced, &training, &validation),
            Err(SivaError::BatchTooLarge { .. })
        ));
    }

    #[test]
    fn missing_validation_is_rejected() {
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        assert!(matches!(
            train(&tiny_config(1), &reduced, &training, &[]),
            Err(SivaError::EmptyValidation)
        ));
    }

    #[test]
    fn classifier_separates_a_nearly_frozen_bad_generator() {
        // With reconstruction off and the generator essentially frozen at
        // its (wrong) initialization, the classifier faces a separable
        // problem and must beat the log(4) indifference level decisively.
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let mut cfg = tiny_config(100);
        cfg.gamma = 0.0;
        cfg.generator_lr = 1e-12;
        cfg.discriminator_lr = 3e-3;
        let state = train(&cfg, &reduced, &training, &validation).unwrap();
        let first = state.records.first().unwrap().l_d;
        let last = state.records.last().unwrap().l_d;
        // Instants where the tip barely moves are genuinely ambiguous, so
        // the loss floors well above zero; demand a clear drop below the
        // 2·ln 2 ≈ 1.386 indifference level rather than a collapse.
        assert!(
            last < 1.30 && last < first - 0.08,
            "first {first}, last {last}"
        );
    }

    #[test]
    fn reconstruction_training_converges_on_the_toy_problem() {
        // With the adversarial term disabled by a tiny classifier influence
        // (gamma heavily weighting reconstruction), a few hundred epochs
        // must drive the generated coefficients toward the truth.
        let reduced = toy_reduced();
        let training = toy_record(&toy_truth(), 100, DatasetLabel::Training);
        let validation = vec![toy_record(&toy_truth(), 100, DatasetLabel::Validation)];
        let mut cfg = tiny_config(400);
        cfg.gamma = 1.0;
        let state = train(&cfg, &reduced, &training, &validation).unwrap();
        let last = &state.records.last().unwrap();
        let first = &state.records.first().unwrap();
        assert!(
            last.l_mse < 0.1 * first.l_mse,
            "reconstruction loss did not shrink: {} -> {}",
            first.l_mse,
            last.l_mse
        );
    }
}
