//! Synthetic data generation: transient response of the full nonlinear beam
//! under half-sine tip impacts, sampled on a uniform grid, plus resimulation
//! of the reduced model under candidate attachment coefficients.

use crate::beam::FullModel;
use crate::numerics::{integrate_rk45, DenseMatrix, LuFactor, NumericsError, OdeSolution};
use crate::reduction::ReducedModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("integration failed at {amplitude_n} N: {source}")]
    Integration {
        amplitude_n: f64,
        source: NumericsError,
    },
    #[error("forcing spec invalid: {0}")]
    BadForcing(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Half-sine impact pulse applied at one DOF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub amplitude_n: f64,
    pub duration_s: f64,
    pub application_dof: usize,
    pub start_time_s: f64,
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.amplitude_n < 0.0 || !self.amplitude_n.is_finite() {
            return Err(SimulateError::BadForcing("amplitude_n must be >= 0"));
        }
        if !(self.duration_s > 0.0) {
            return Err(SimulateError::BadForcing("duration_s must be > 0"));
        }
        if self.start_time_s < 0.0 {
            return Err(SimulateError::BadForcing("start_time_s must be >= 0"));
        }
        Ok(())
    }
}

/// Truth attachment: linear plus cubic spring at the tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttachmentSpec {
    pub k_lin_n_per_m: f64,
    pub k_nl_n_per_m3: f64,
}

/// Reference attachment: 1.1e4 N/m linear plus 1e8 N/m^3 cubic spring.
impl Default for AttachmentSpec {
    fn default() -> Self {
        AttachmentSpec {
            k_lin_n_per_m: 1.1e4,
            k_nl_n_per_m3: 1.0e8,
        }
    }
}

/// Uniform sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub duration_s: f64,
    pub rate_hz: f64,
}

/// Reference acquisition window: 4 s at 2 kHz.
impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            duration_s: 4.0,
            rate_hz: 2000.0,
        }
    }
}

impl GridSpec {
    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.sample_count())
            .map(|i| i as f64 / self.rate_hz)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetLabel {
    Training,
    Validation,
    Resimulation,
}

/// Uniform-grid trajectories over the retained translational DOFs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub times_s: Vec<f64>,
    /// Rows = time samples, columns = retained DOFs (root to tip).
    pub q: DenseMatrix,
    pub qd: DenseMatrix,
    pub qdd: DenseMatrix,
    pub forcing: ForcingSpec,
    pub label: DatasetLabel,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn dof_count(&self) -> usize {
        self.q.cols()
    }

    /// Tip displacement series (last column).
    pub fn tip_displacement(&self) -> Vec<f64> {
        self.q.column(self.q.cols() - 1)
    }
}

/// Pulse force at time t.
pub fn half_sine(spec: &ForcingSpec, t: f64) -> f64 {
    let tau = t - spec.start_time_s;
    if tau < 0.0 || tau > spec.duration_s {
        0.0
    } else {
        spec.amplitude_n * (std::f64::consts::PI * tau / spec.duration_s).sin()
    }
}

/// Integrate the full clamped model in first-order form with a general
/// polynomial tip attachment (k1..k5) and return the raw 2n-state solution
/// (displacements then velocities).
pub fn simulate_full_poly_states(
    model: &FullModel,
    c: &DenseMatrix,
    coeffs: &[f64; 5],
    forcing: &ForcingSpec,
    grid: &GridSpec,
) -> Result<OdeSolution, SimulateError> {
    forcing.validate()?;
    let n = model.dim();
    let tip = model.tip_translation();
    let app = forcing.application_dof;
    assert!(app < n, "application DOF out of range");

    let m_lu = LuFactor::new(&model.m)?;
    let m_inv_k = m_lu.solve_mat(&model.k);
    let m_inv_c = m_lu.solve_mat(c);
    let mut unit = vec![0.0; n];
    unit[app] = 1.0;
    let m_inv_app = m_lu.solve_vec(&unit);
    unit[app] = 0.0;
    unit[tip] = 1.0;
    let m_inv_tip = m_lu.solve_vec(&unit);

    let coeffs = *coeffs;
    let forcing_local = *forcing;
    let mut kq = vec![0.0; n];
    let mut cv = vec![0.0; n];
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (q, v) = y.split_at(n);
        m_inv_k.matvec_into(q, &mut kq);
        m_inv_c.matvec_into(v, &mut cv);
        let f = half_sine(&forcing_local, t);
        let qt = q[tip];
        let mut spring = 0.0;
        let mut power = 1.0;
        for k in coeffs {
            power *= qt;
            spring += k * power;
        }
        for i in 0..n {
            dy[i] = v[i];
            dy[n + i] = -kq[i] - cv[i] + f * m_inv_app[i] - spring * m_inv_tip[i];
        }
    };

    let y0 = vec![0.0; 2 * n];
    let times = grid.times();
    integrate_rk45(rhs, &y0, (0.0, grid.duration_s), 1e-8, 1e-8, &times).map_err(|source| {
        SimulateError::Integration {
            amplitude_n: forcing.amplitude_n,
            source,
        }
    })
}

/// As simulate_full_poly_states for the linear-plus-cubic truth attachment.
pub fn simulate_full_states(
    model: &FullModel,
    c: &DenseMatrix,
    attachment: &AttachmentSpec,
    forcing: &ForcingSpec,
    grid: &GridSpec,
) -> Result<OdeSolution, SimulateError> {
    let coeffs = [
        attachment.k_lin_n_per_m,
        0.0,
        attachment.k_nl_n_per_m3,
        0.0,
        0.0,
    ];
    simulate_full_poly_states(model, c, &coeffs, forcing, grid)
}

/// Simulate the full model and restrict to the translational DOFs.
/// Accelerations come from the ODE right-hand side at the grid states.
pub fn simulate_full(
    model: &FullModel,
    c: &DenseMatrix,
    attachment: &AttachmentSpec,
    forcing: &ForcingSpec,
    grid: &GridSpec,
    label: DatasetLabel,
) -> Result<TrajectorySet, SimulateError> {
    let sol = simulate_full_states(model, c, attachment, forcing, grid)?;
    let masters: Vec<usize> = model.dof_map.iter().map(|&(t, _)| t).collect();
    Ok(restrict_solution(&sol, model.dim(), &masters, forcing, label))
}

/// Full-model resimulation with a candidate coefficient set in place of the
/// truth attachment, restricted to translational DOFs.
pub fn simulate_full_poly(
    model: &FullModel,
    c: &DenseMatrix,
    coeffs: &[f64; 5],
    forcing: &ForcingSpec,
    grid: &GridSpec,
) -> Result<TrajectorySet, SimulateError> {
    let sol = simulate_full_poly_states(model, c, coeffs, forcing, grid)?;
    let masters: Vec<usize> = model.dof_map.iter().map(|&(t, _)| t).collect();
    Ok(restrict_solution(
        &sol,
        model.dim(),
        &masters,
        forcing,
        DatasetLabel::Resimulation,
    ))
}

fn restrict_solution(
    sol: &OdeSolution,
    n: usize,
    masters: &[usize],
    forcing: &ForcingSpec,
    label: DatasetLabel,
) -> TrajectorySet {
    let nt = sol.grid_times.len();
    let nm = masters.len();
    let mut q = DenseMatrix::zeros(nt, nm);
    let mut qd = DenseMatrix::zeros(nt, nm);
    let mut qdd = DenseMatrix::zeros(nt, nm);
    for t in 0..nt {
        for (j, &dof) in masters.iter().enumerate() {
            q[(t, j)] = sol.states[(t, dof)];
            qd[(t, j)] = sol.states[(t, n + dof)];
            qdd[(t, j)] = sol.rhs_values[(t, n + dof)];
        }
    }
    TrajectorySet {
        times_s: sol.grid_times.clone(),
        q,
        qd,
        qdd,
        forcing: *forcing,
        label,
    }
}

/// The three-record corpus: training at one amplitude, validation at others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Datasets {
    pub training: TrajectorySet,
    pub validation: Vec<TrajectorySet>,
}

pub fn make_datasets(
    model: &FullModel,
    c: &DenseMatrix,
    attachment: &AttachmentSpec,
    pulse_duration_s: f64,
    training_amplitude_n: f64,
    validation_amplitudes_n: &[f64],
    grid: &GridSpec,
) -> Result<Datasets, SimulateError> {
    let forcing = |amplitude_n: f64| ForcingSpec {
        amplitude_n,
        duration_s: pulse_duration_s,
        application_dof: model.tip_translation(),
        start_time_s: 0.0,
    };
    let training = simulate_full(
        model,
        c,
        attachment,
        &forcing(training_amplitude_n),
        grid,
        DatasetLabel::Training,
    )?;
    let mut validation = Vec::new();
    for &amp in validation_amplitudes_n {
        validation.push(simulate_full(
            model,
            c,
            attachment,
            &forcing(amp),
            grid,
            DatasetLabel::Validation,
        )?);
    }
    Ok(Datasets {
        training,
        validation,
    })
}

/// Resimulate the REDUCED model with a candidate coefficient set
/// k1..k5 acting at the tip (used for estimate ranking and baselines).
pub fn simulate_reduced(
    reduced: &ReducedModel,
    coeffs: &[f64; 5],
    forcing: &ForcingSpec,
    grid: &GridSpec,
) -> Result<TrajectorySet, SimulateError> {
    forcing.validate()?;
    let n = reduced.dim();
    let tip = reduced.tip_index;
    let app = forcing.application_dof.min(n - 1);

    let m_lu = LuFactor::new(&reduced.m_r)?;
    let m_inv_k = m_lu.solve_mat(&reduced.k_r);
    let m_inv_c = m_lu.solve_mat(&reduced.c_r);
    let mut unit = vec![0.0; n];
    unit[app] = 1.0;
    let m_inv_app = m_lu.solve_vec(&unit);
    unit[app] = 0.0;
    unit[tip] = 1.0;
    let m_inv_tip = m_lu.solve_vec(&unit);

    let coeffs = *coeffs;
    let forcing_local = *forcing;
    let mut kq = vec![0.0; n];
    let mut cv = vec![0.0; n];
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (q, v) = y.split_at(n);
        m_inv_k.matvec_into(q, &mut kq);
        m_inv_c.matvec_into(v, &mut cv);
        let f = half_sine(&forcing_local, t);
        let qt = q[tip];
        let mut spring = 0.0;
        let mut power = 1.0;
        for k in coeffs {
            power *= qt;
            spring += k * power;
        }
        for i in 0..n {
            dy[i] = v[i];
            dy[n + i] = -kq[i] - cv[i] + f * m_inv_app[i] - spring * m_inv_tip[i];
        }
    };

    let y0 = vec![0.0; 2 * n];
    let times = grid.times();
    let sol = integrate_rk45(rhs, &y0, (0.0, grid.duration_s), 1e-8, 1e-8, &times).map_err(
        |source| SimulateError::Integration {
            amplitude_n: forcing.amplitude_n,
            source,
        },
    )?;
    let masters: Vec<usize> = (0..n).collect();
    Ok(restrict_solution(
        &sol,
        n,
        &masters,
        forcing,
        DatasetLabel::Resimulation,
    ))
}
