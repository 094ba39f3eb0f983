use super::{ParameterVector, SivaError};
use crate::numerics::{DenseMatrix, LuFactor};
use crate::reduction::ReducedModel;

/// Differentiable rigid link between coefficients and accelerations:
/// given measured states (q, q̇) and the applied force, predicts
/// q̈ = M⁻¹(−C q̇ − K q − κ(q) + F) where κ acts only at the tip entry
/// with magnitude Σ k_i q_tip^i. Everything is algebraic in the measured
/// states, so gradients with respect to the k_i are exact monomials.
#[derive(Debug, Clone)]
pub struct PhysicsLayer {
    dim: usize,
    tip_index: usize,
    mass_lu: LuFactor,
    /// s = −M⁻¹ e_tip: the acceleration direction excited by tip force.
    s: Vec<f64>,
    c_r: DenseMatrix,
    k_r: DenseMatrix,
}

impl PhysicsLayer {
    pub fn new(model: &ReducedModel) -> Result<Self, SivaError> {
        let dim = model.dim();
        let mass_lu = LuFactor::new(&model.m_r)?;
        let mut e_tip = vec![0.0; dim];
        e_tip[model.tip_index] = 1.0;
        let mut s = mass_lu.solve_vec(&e_tip);
        for v in &mut s {
            *v = -*v;
        }
        Ok(Self {
            dim,
            tip_index: model.tip_index,
            mass_lu,
            s,
            c_r: model.c_r.clone(),
            k_r: model.k_r.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tip_index(&self) -> usize {
        self.tip_index
    }

    /// −M⁻¹ e_tip, the per-unit-tip-force acceleration pattern.
    pub fn tip_sensitivity(&self) -> &[f64] {
        &self.s
    }

    fn check_dim(&self, got: usize) -> Result<(), SivaError> {
        if got == self.dim {
            Ok(())
        } else {
            Err(SivaError::Dimension {
                expected: self.dim,
                got,
            })
        }
    }

    /// Acceleration of the attachment-free model: M⁻¹(−C q̇ − K q + F).
    pub fn linear_accel(&self, q: &[f64], qd: &[f64], f: &[f64]) -> Result<Vec<f64>, SivaError> {
        self.check_dim(q.len())?;
        self.check_dim(qd.len())?;
        self.check_dim(f.len())?;
        let mut rhs = vec![0.0; self.dim];
        let mut tmp = vec![0.0; self.dim];
        self.k_r.matvec_into(q, &mut rhs);
        self.c_r.matvec_into(qd, &mut tmp);
        for i in 0..self.dim {
            rhs[i] = f[i] - rhs[i] - tmp[i];
        }
        Ok(self.mass_lu.solve_vec(&rhs))
    }

    /// Predicted acceleration under candidate coefficients at measured
    /// states. M⁻¹ is applied through the cached factorization.
    pub fn physics_accel(
        &self,
        lambda: &ParameterVector,
        q: &[f64],
        qd: &[f64],
        f: &[f64],
    ) -> Result<Vec<f64>, SivaError> {
        self.check_dim(q.len())?;
        self.check_dim(qd.len())?;
        self.check_dim(f.len())?;
        let mut rhs = vec![0.0; self.dim];
        let mut tmp = vec![0.0; self.dim];
        self.k_r.matvec_into(q, &mut rhs);
        self.c_r.matvec_into(qd, &mut tmp);
        for i in 0..self.dim {
            rhs[i] = f[i] - rhs[i] - tmp[i];
        }
        rhs[self.tip_index] -= lambda.tip_force(q[self.tip_index]);
        Ok(self.mass_lu.solve_vec(&rhs))
    }

    /// Exact sensitivity ∂q̈_j/∂k_i = s_j · q_tip^i as a dim×5 matrix.
    pub fn accel_grad_wrt_k(&self, q_tip: f64) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.dim, 5);
        let mut q_pow = 1.0;
        for i in 0..5 {
            q_pow *= q_tip;
            for j in 0..self.dim {
                g[(j, i)] = self.s[j] * q_pow;
            }
        }
        g
    }
}
