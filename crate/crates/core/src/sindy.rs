//! Sparse-regression baseline: regress the tip acceleration onto a
//! candidate library of states and tip-displacement powers with
//! sequentially thresholded least squares, then read the attachment
//! coefficients off the tip row of the reduced equation of motion.

use crate::numerics::{lstsq_qr, DenseMatrix, LuFactor, NumericsError};
use crate::reduction::ReducedModel;
use crate::simulate::{simulate_reduced, GridSpec, TrajectorySet};
use crate::siva::ParameterVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SindyError {
    #[error("threshold must be finite and >= 0")]
    BadThreshold,
    #[error("record has no samples")]
    EmptyRecord,
    #[error("library and target lengths differ: {library} vs {targets}")]
    LengthMismatch { library: usize, targets: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Candidate-function design matrix: velocities per DOF, displacements per
/// DOF, then tip displacement to the powers two through five.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLibrary {
    pub labels: Vec<String>,
    /// Rows = time samples, columns follow `labels`.
    pub theta: DenseMatrix,
}

pub fn build_library(data: &TrajectorySet) -> CandidateLibrary {
    let n = data.len();
    let dofs = data.dof_count();
    let tip = dofs - 1;
    let cols = 2 * dofs + 4;
    let mut labels = Vec::with_capacity(cols);
    for j in 0..dofs {
        labels.push(format!("qd_{}", j + 1));
    }
    for j in 0..dofs {
        labels.push(format!("q_{}", j + 1));
    }
    for p in 2..=5 {
        labels.push(format!("q_tip^{p}"));
    }
    let mut theta = DenseMatrix::zeros(n, cols);
    for t in 0..n {
        let row = theta.row_mut(t);
        let qd = data.qd.row(t);
        let q = data.q.row(t);
        row[..dofs].copy_from_slice(qd);
        row[dofs..2 * dofs].copy_from_slice(q);
        let q_tip = q[tip];
        let mut p = q_tip;
        for c in 0..4 {
            p *= q_tip;
            row[2 * dofs + c] = p;
        }
    }
    CandidateLibrary { labels, theta }
}

/// Outcome of sequentially thresholded least squares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StlsqResult {
    /// Unscaled coefficients; pruned entries are exactly zero.
    pub coefficients: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Iterate { least squares on active columns, prune coefficients whose
/// norm-scaled magnitude falls below the threshold } until the active set
/// is stable. Columns are scaled to unit norm internally (they span many
/// orders of magnitude); reported coefficients are unscaled.
pub fn stlsq(
    theta: &DenseMatrix,
    targets: &[f64],
    threshold: f64,
    max_iterations: usize,
) -> Result<StlsqResult, SindyError> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(SindyError::BadThreshold);
    }
    if theta.rows() == 0 {
        return Err(SindyError::EmptyRecord);
    }
    if theta.rows() != targets.len() {
        return Err(SindyError::LengthMismatch {
            library: theta.rows(),
            targets: targets.len(),
        });
    }
    let n = theta.rows();
    let cols = theta.cols();
    let mut warnings = Vec::new();

    let mut norms = vec![0.0; cols];
    for j in 0..cols {
        let mut s = 0.0;
        for t in 0..n {
            let v = theta[(t, j)];
            s += v * v;
        }
        norms[j] = s.sqrt();
    }
    let mut active: Vec<bool> = norms.iter().map(|&v| v > 0.0).collect();
    if active.iter().any(|a| !a) {
        warnings.push("zero-norm columns excluded from the start".to_string());
    }

    let mut scaled_coeffs = vec![0.0; cols];
    let mut iterations = 0;
    for _ in 0..max_iterations.max(1) {
        iterations += 1;
        let idx: Vec<usize> = (0..cols).filter(|&j| active[j]).collect();
        scaled_coeffs.iter_mut().for_each(|v| *v = 0.0);
        if idx.is_empty() {
            break;
        }
        // Assemble the scaled active submatrix.
        let mut sub = DenseMatrix::zeros(n, idx.len());
        for (c, &j) in idx.iter().enumerate() {
            for t in 0..n {
                sub[(t, c)] = theta[(t, j)] / norms[j];
            }
        }
        let (solution, dropped) = lstsq_qr(&sub, targets, 1e-12)?;
        if !dropped.is_empty() {
            let names: Vec<String> = dropped.iter().map(|&c| idx[c].to_string()).collect();
            warnings.push(format!(
                "rank-deficient active set: dropped dependent column(s) {}",
                names.join(", ")
            ));
        }
        for (c, &j) in idx.iter().enumerate() {
            scaled_coeffs[j] = solution[c];
        }
        for &c in &dropped {
            active[idx[c]] = false;
            scaled_coeffs[idx[c]] = 0.0;
        }
        let mut changed = false;
        for &j in &idx {
            if active[j] && scaled_coeffs[j].abs() < threshold {
                active[j] = false;
                scaled_coeffs[j] = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let coefficients: Vec<f64> = (0..cols)
        .map(|j| {
            if active[j] && scaled_coeffs[j] != 0.0 {
                scaled_coeffs[j] / norms[j]
            } else {
                0.0
            }
        })
        .collect();
    Ok(StlsqResult {
        coefficients,
        active,
        iterations,
        warnings,
    })
}

/// Read the attachment polynomial off regression coefficients of the tip
/// acceleration. On the tip row of the reduced equation,
/// q̈_tip = … + (−M⁻¹K)_{tip,tip}·q_tip − (M⁻¹)_{tip,tip}·Σ k_i q_tip^i + …,
/// so the monomial coefficients give k_2..k_5 directly and the q_tip
/// coefficient gives k_1 after removing the structural part.
pub fn extract_attachment(
    coefficients: &[f64],
    reduced: &ReducedModel,
) -> Result<ParameterVector, SindyError> {
    let dofs = reduced.dim();
    assert_eq!(coefficients.len(), 2 * dofs + 4, "coefficient count");
    let tip = reduced.tip_index;
    let lu = LuFactor::new(&reduced.m_r)?;
    let mut e_tip = vec![0.0; dofs];
    e_tip[tip] = 1.0;
    let m_inv_tip = lu.solve_vec(&e_tip)[tip];
    let k_col: Vec<f64> = (0..dofs).map(|i| reduced.k_r[(i, tip)]).collect();
    let m_inv_k_tip = lu.solve_vec(&k_col)[tip];

    let c_q_tip = coefficients[dofs + tip];
    let mut k = [0.0; 5];
    k[0] = (-m_inv_k_tip - c_q_tip) / m_inv_tip;
    for i in 2..=5 {
        k[i - 1] = -coefficients[2 * dofs + (i - 2)] / m_inv_tip;
    }
    Ok(ParameterVector::from_array(k))
}

/// Full baseline report for the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SindyReport {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub threshold: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub attachment: ParameterVector,
    /// Tip-displacement error of the resimulated identified model; a
    /// diverging resimulation records an infinite error.
    #[serde(with = "crate::serde_util::nonfinite_opt")]
    pub resim_mse_m2: Option<f64>,
}

/// Run the baseline end to end on one record: build the library, regress
/// the tip acceleration, extract the attachment coefficients, and score
/// them by resimulation.
pub fn identify(
    reduced: &ReducedModel,
    record: &TrajectorySet,
    threshold: f64,
) -> Result<SindyReport, SindyError> {
    if record.is_empty() {
        return Err(SindyError::EmptyRecord);
    }
    let library = build_library(record);
    let targets = record.qdd.column(record.dof_count() - 1);
    let result = stlsq(&library.theta, &targets, threshold, 20)?;
    let attachment = extract_attachment(&result.coefficients, reduced)?;

    let resim_mse_m2 = if record.len() >= 2 {
        let dt = record.times_s[1] - record.times_s[0];
        let grid = GridSpec {
            duration_s: *record.times_s.last().unwrap(),
            rate_hz: 1.0 / dt,
        };
        let mse = match simulate_reduced(reduced, &attachment.as_array(), &record.forcing, &grid)
        {
            Ok(resim) => {
                let tip = resim.tip_displacement();
                let reference = record.tip_displacement();
                let m = tip.len().min(reference.len());
                let mut s = 0.0;
                for i in 0..m {
                    let d = tip[i] - reference[i];
                    s += d * d;
                }
                let v = s / m as f64;
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        };
        Some(mse)
    } else {
        None
    };

    Ok(SindyReport {
        labels: library.labels,
        coefficients: result.coefficients,
        threshold,
        iterations: result.iterations,
        warnings: result.warnings,
        attachment,
        resim_mse_m2,
    })
}
