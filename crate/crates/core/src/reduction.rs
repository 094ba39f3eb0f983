//! Guyan (static) condensation of the full beam model onto its
//! translational DOFs, yielding the reduced matrices the physics layer uses.

use crate::beam::FullModel;
use crate::numerics::{DenseMatrix, LuFactor, NumericsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("no master DOFs selected")]
    EmptyMasters,
    #[error("master index {index} out of range (dim {dim})")]
    MasterOutOfRange { index: usize, dim: usize },
    #[error("duplicate master index {index}")]
    DuplicateMaster { index: usize },
    #[error("slave-slave stiffness block is singular at slave DOF {dof}")]
    SingularSlaveBlock { dof: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Reduced mass/damping/stiffness over the retained master DOFs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedModel {
    pub m_r: DenseMatrix,
    pub c_r: DenseMatrix,
    pub k_r: DenseMatrix,
    /// Indices into the full model, ascending.
    pub master_dofs: Vec<usize>,
    /// Position of the tip translation within the reduced ordering.
    pub tip_index: usize,
}

impl ReducedModel {
    pub fn dim(&self) -> usize {
        self.m_r.rows()
    }
}

/// The translational DOF of every free node, root to tip.
pub fn select_translational(model: &FullModel) -> Vec<usize> {
    model.dof_map.iter().map(|&(t, _)| t).collect()
}

/// Static condensation: T = [I; -K_ss^{-1} K_sm] built from the spring-free
/// beam stiffness (the attachment stiffnesses are the unknowns), then
/// congruence products for all three matrices.
pub fn guyan_reduce(
    model: &FullModel,
    c: &DenseMatrix,
    masters: &[usize],
) -> Result<ReducedModel, ReductionError> {
    let dim = model.dim();
    if masters.is_empty() {
        return Err(ReductionError::EmptyMasters);
    }
    let mut seen = vec![false; dim];
    for &idx in masters {
        if idx >= dim {
            return Err(ReductionError::MasterOutOfRange { index: idx, dim });
        }
        if seen[idx] {
            return Err(ReductionError::DuplicateMaster { index: idx });
        }
        seen[idx] = true;
    }
    let mut masters = masters.to_vec();
    masters.sort_unstable();
    let slaves: Vec<usize> = (0..dim).filter(|i| !seen[*i]).collect();
    let (nm, ns) = (masters.len(), slaves.len());

    // T columns live in the full DOF numbering.
    let mut t = DenseMatrix::zeros(dim, nm);
    for (j, &mj) in masters.iter().enumerate() {
        t[(mj, j)] = 1.0;
    }
    if ns > 0 {
        let mut k_ss = DenseMatrix::zeros(ns, ns);
        for (a, &sa) in slaves.iter().enumerate() {
            for (b, &sb) in slaves.iter().enumerate() {
                k_ss[(a, b)] = model.k[(sa, sb)];
            }
        }
        let mut k_sm = DenseMatrix::zeros(ns, nm);
        for (a, &sa) in slaves.iter().enumerate() {
            for (j, &mj) in masters.iter().enumerate() {
                k_sm[(a, j)] = model.k[(sa, mj)];
            }
        }
        let lu = LuFactor::new(&k_ss).map_err(|e| match e {
            NumericsError::SingularMatrix { pivot } => {
                ReductionError::SingularSlaveBlock { dof: slaves[pivot] }
            }
            other => ReductionError::Numerics(other),
        })?;
        let x = lu.solve_mat(&k_sm);
        for (a, &sa) in slaves.iter().enumerate() {
            for j in 0..nm {
                t[(sa, j)] = -x[(a, j)];
            }
        }
    }

    let reduce = |a: &DenseMatrix| -> DenseMatrix {
        let mut r = t.transpose().matmul(&a.matmul(&t));
        r.symmetrize();
        r
    };

    let tip_full = model.tip_translation();
    let tip_index = masters
        .iter()
        .position(|&mj| mj == tip_full)
        .unwrap_or(nm - 1);

    Ok(ReducedModel {
        m_r: reduce(&model.m),
        c_r: reduce(c),
        k_r: reduce(&model.k),
        master_dofs: masters,
        tip_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
    use crate::numerics::{eig_sym_generalized, solve_linear, CholeskyFactor};

    fn reference_spec() -> BeamSpec {
        BeamSpec {
            elastic_modulus_pa: 180e9,
            density_kg_m3: 7800.0,
            length_m: 1.524,
            width_m: 0.0381,
            thickness_m: 0.0064,
            element_count: 15,
            tip_mass_kg: 0.0522,
        }
    }

    fn reduced_reference() -> (crate::beam::FullModel, ReducedModel) {
        let model = build_full_model(&reference_spec()).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let ratios = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];
        let c = build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
        let masters = select_translational(&model);
        let reduced = guyan_reduce(&model, &c, &masters).unwrap();
        (model, reduced)
    }

    #[test]
    fn all_masters_is_identity_transform() {
        let model = build_full_model(&reference_spec()).unwrap();
        let c = DenseMatrix::zeros(30, 30);
        let masters: Vec<usize> = (0..30).collect();
        let red = guyan_reduce(&model, &c, &masters).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                assert!((red.m_r[(i, j)] - model.m[(i, j)]).abs() <= 1e-12 * model.m.max_abs());
                assert!((red.k_r[(i, j)] - model.k[(i, j)]).abs() <= 1e-12 * model.k.max_abs());
            }
        }
    }

    #[test]
    fn two_dof_chain_by_hand() {
        // K = [[2,-1],[-1,1]], M = I, keep DOF 0: T = [1;1], K_R = [1], M_R = [2].
        let spec = reference_spec();
        let model = crate::beam::FullModel {
            spec,
            m: DenseMatrix::identity(2),
            k: DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 1.0]]),
            dof_map: vec![(0, 1)],
            node_positions_m: vec![1.0],
        };
        let red = guyan_reduce(&model, &DenseMatrix::zeros(2, 2), &[0]).unwrap();
        assert!((red.k_r[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((red.m_r[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn translational_selection_partitions_dofs() {
        let model = build_full_model(&reference_spec()).unwrap();
        let trans = select_translational(&model);
        assert_eq!(trans.len(), 15);
        let rots: Vec<usize> = model.dof_map.iter().map(|&(_, r)| r).collect();
        for t in &trans {
            assert!(!rots.contains(t));
        }
        assert_eq!(*trans.last().unwrap(), model.tip_translation());
    }

    #[test]
    fn reduced_model_is_spd_with_tip_last() {
        let (_, red) = reduced_reference();
        assert_eq!(red.dim(), 15);
        assert_eq!(red.tip_index, 14);
        assert!(red.m_r.is_symmetric());
        assert!(red.k_r.is_symmetric());
        assert!(red.c_r.is_symmetric());
        assert!(CholeskyFactor::new(&red.m_r).is_ok());
        assert!(CholeskyFactor::new(&red.k_r).is_ok());
    }

    #[test]
    fn rayleigh_ritz_bound_and_low_mode_accuracy() {
        let (model, red) = reduced_reference();
        let full = eig_sym_generalized(&model.k, &model.m).unwrap();
        let reduced = eig_sym_generalized(&red.k_r, &red.m_r).unwrap();
        for mode in 0..10 {
            assert!(
                reduced.values[mode] >= full.values[mode] * (1.0 - 1e-9),
                "mode {mode} violates the variational bound"
            );
        }
        for mode in 0..5 {
            let f_full = full.values[mode].sqrt();
            let f_red = reduced.values[mode].sqrt();
            let rel = (f_red - f_full).abs() / f_full;
            assert!(rel < 0.01, "mode {mode} off by {rel}");
        }
    }

    #[test]
    fn static_condensation_is_exact_for_master_loads() {
        let (model, red) = reduced_reference();
        let dim = model.dim();
        // Unit tip load in the full model vs the reduced model.
        let mut f_full = DenseMatrix::zeros(dim, 1);
        f_full[(model.tip_translation(), 0)] = 1.0;
        let q_full = solve_linear(&model.k, &f_full).unwrap();

        let mut f_red = DenseMatrix::zeros(red.dim(), 1);
        f_red[(red.tip_index, 0)] = 1.0;
        let q_red = solve_linear(&red.k_r, &f_red).unwrap();

        for (j, &mj) in red.master_dofs.iter().enumerate() {
            let rel = (q_red[(j, 0)] - q_full[(mj, 0)]).abs() / q_full[(mj, 0)].abs();
            assert!(rel < 1e-9, "master {j} static deflection off by {rel}");
        }
    }

    #[test]
    fn bad_master_sets_are_rejected() {
        let model = build_full_model(&reference_spec()).unwrap();
        let c = DenseMatrix::zeros(30, 30);
        assert!(matches!(
            guyan_reduce(&model, &c, &[]),
            Err(ReductionError::EmptyMasters)
        ));
        assert!(matches!(
            guyan_reduce(&model, &c, &[99]),
            Err(ReductionError::MasterOutOfRange { index: 99, .. })
        ));
        assert!(matches!(
            guyan_reduce(&model, &c, &[3, 3]),
            Err(ReductionError::DuplicateMaster { index: 3 })
        ));
    }
}
