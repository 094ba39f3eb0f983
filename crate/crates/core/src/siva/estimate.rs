use super::{
    generate_parameters, EstimateMethod, ParameterEstimate, ParameterVector, SivaError,
    TrainingState,
};
use crate::nn::{loss_mse, RngStream};
use crate::numerics::DenseMatrix;
use crate::reduction::ReducedModel;
use crate::simulate::{simulate_reduced, GridSpec, TrajectorySet};

/// Per-coefficient mean and unbiased standard deviation of a sample set.
fn mean_and_std(samples: &[ParameterVector]) -> (ParameterVector, ParameterVector) {
    let n = samples.len() as f64;
    let mut mean = [0.0; 5];
    for s in samples {
        let k = s.as_array();
        for m in 0..5 {
            mean[m] += k[m];
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut std = [0.0; 5];
    if samples.len() > 1 {
        for s in samples {
            let k = s.as_array();
            for m in 0..5 {
                let d = k[m] - mean[m];
                std[m] += d * d;
            }
        }
        for v in &mut std {
            *v = (*v / (n - 1.0)).sqrt();
        }
    }
    (
        ParameterVector::from_array(mean),
        ParameterVector::from_array(std),
    )
}

/// Draw `n` composed coefficient samples from the frozen generator. The
/// noise stream continues deterministically from where training stopped,
/// so repeated calls on the same state reproduce the same draws.
pub fn draw_parameter_samples(
    state: &TrainingState,
    n: usize,
) -> Result<Vec<ParameterVector>, SivaError> {
    if n == 0 {
        return Err(SivaError::BadConfig("sample count must be >= 1"));
    }
    let mut rng = RngStream::restore(&state.rng_state)?;
    let mut z = DenseMatrix::zeros(n, state.config.noise_dim);
    rng.fill_normal(z.as_mut_slice());
    generate_parameters(&state.generator, &z)
}

/// Post-training sampling estimate: draw `n` fresh noise vectors through
/// the frozen generator and average the composed coefficients.
pub fn approach_i(state: &TrainingState, n: usize) -> Result<ParameterEstimate, SivaError> {
    let samples = draw_parameter_samples(state, n)?;
    let (values, std_dev) = mean_and_std(&samples);
    Ok(ParameterEstimate {
        method: EstimateMethod::ApproachI,
        values,
        std_dev,
        sample_count: n,
        resim_mse_m2: None,
    })
}

/// History-averaging estimate: mean and spread of the recorded per-epoch
/// batch-mean coefficients for epochs strictly after `start_epoch`.
pub fn approach_ii(state: &TrainingState, start_epoch: usize) -> Result<ParameterEstimate, SivaError> {
    let window: Vec<ParameterVector> = state
        .records
        .iter()
        .filter(|r| r.epoch > start_epoch)
        .map(|r| r.lambda)
        .collect();
    if window.is_empty() {
        return Err(SivaError::StartEpochBeyondHistory {
            start: start_epoch,
            completed: state.epoch,
        });
    }
    let (values, std_dev) = mean_and_std(&window);
    Ok(ParameterEstimate {
        method: EstimateMethod::ApproachII,
        values,
        std_dev,
        sample_count: window.len(),
        resim_mse_m2: None,
    })
}

fn grid_of(record: &TrajectorySet) -> Result<GridSpec, SivaError> {
    if record.len() < 2 {
        return Err(SivaError::BadConfig(
            "resimulation needs at least two time samples",
        ));
    }
    let dt = record.times_s[1] - record.times_s[0];
    if !(dt > 0.0) {
        return Err(SivaError::BadConfig("time grid must be increasing"));
    }
    Ok(GridSpec {
        duration_s: *record.times_s.last().unwrap(),
        rate_hz: 1.0 / dt,
    })
}

/// Rank candidate estimates by resimulating the reduced model with each
/// one under the record's forcing and scoring the tip-displacement MSE.
/// Every candidate gets its score attached (a failed simulation scores
/// infinite); the best-scoring candidate is returned.
pub fn select_best(
    candidates: &mut [ParameterEstimate],
    reduced: &ReducedModel,
    record: &TrajectorySet,
) -> Result<ParameterEstimate, SivaError> {
    if candidates.is_empty() {
        return Err(SivaError::NoCandidates);
    }
    let grid = grid_of(record)?;
    let reference = record.tip_displacement();
    for cand in candidates.iter_mut() {
        let coeffs = cand.values.as_array();
        cand.resim_mse_m2 = match simulate_reduced(reduced, &coeffs, &record.forcing, &grid) {
            Ok(resim) => {
                let tip = resim.tip_displacement();
                let m = tip.len().min(reference.len());
                Some(loss_mse(&tip[..m], &reference[..m]))
            }
            Err(_) => Some(f64::INFINITY),
        };
    }
    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.resim_mse_m2
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.resim_mse_m2.unwrap_or(f64::INFINITY))
        })
        .unwrap()
        .clone();
    Ok(best)
}
