//! Finite-element model of the clamped steel beam with a lumped tip mass:
//! Euler-Bernoulli assembly, modal analysis, and modal damping construction.

use crate::numerics::{eig_sym_generalized, DenseMatrix, NumericsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("beam spec field `{field}` must be strictly positive")]
    NonPositive { field: &'static str },
    #[error("element_count must be at least 1")]
    NoElements,
    #[error("damping needs between 1 and {modes} ratios, got {given}")]
    RatioCount { modes: usize, given: usize },
    #[error("mode shape / frequency count mismatch")]
    ModeCount,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Geometry and material of the uniform cantilever plus its tip mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSpec {
    pub elastic_modulus_pa: f64,
    pub density_kg_m3: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub thickness_m: f64,
    pub element_count: usize,
    pub tip_mass_kg: f64,
}

/// The reference specimen: a 1.524 m steel cantilever of 38.1 x 6.4 mm
/// section with a 52.2 g tip mass, meshed with 15 elements.
impl Default for BeamSpec {
    fn default() -> Self {
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
}

impl BeamSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positives = [
            (self.elastic_modulus_pa, "elastic_modulus_pa"),
            (self.density_kg_m3, "density_kg_m3"),
            (self.length_m, "length_m"),
            (self.width_m, "width_m"),
            (self.thickness_m, "thickness_m"),
        ];
        for (value, field) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositive { field });
            }
        }
        if self.tip_mass_kg < 0.0 || !self.tip_mass_kg.is_finite() {
            return Err(ModelError::NonPositive {
                field: "tip_mass_kg",
            });
        }
        if self.element_count == 0 {
            return Err(ModelError::NoElements);
        }
        Ok(())
    }

    /// Cross-section area w*t.
    pub fn area(&self) -> f64 {
        self.width_m * self.thickness_m
    }

    /// Second moment of area w*t^3/12.
    pub fn second_moment(&self) -> f64 {
        self.width_m * self.thickness_m.powi(3) / 12.0
    }

    pub fn flexural_rigidity(&self) -> f64 {
        self.elastic_modulus_pa * self.second_moment()
    }

    pub fn mass_per_length(&self) -> f64 {
        self.density_kg_m3 * self.area()
    }
}

/// Assembled mass and stiffness with the clamped end removed. DOF numbering:
/// free node j (1-based from the clamp) owns translation 2(j-1) and rotation
/// 2(j-1)+1.
#[derive(Debug, Clone)]
pub struct FullModel {
    pub spec: BeamSpec,
    pub m: DenseMatrix,
    pub k: DenseMatrix,
    /// (translation index, rotation index) per free node, root side first.
    pub dof_map: Vec<(usize, usize)>,
    /// Axial position of each free node, matching dof_map order.
    pub node_positions_m: Vec<f64>,
}

impl FullModel {
    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    /// Translational DOF index at the beam tip.
    pub fn tip_translation(&self) -> usize {
        self.dof_map.last().expect("at least one free node").0
    }
}

/// Modal frequencies and mass-normalized shapes; damping ratios are supplied
/// separately by the caller (measured quantities, not products of the model).
#[derive(Debug, Clone)]
pub struct ModalData {
    pub frequencies_hz: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub mode_shapes: DenseMatrix,
}

/// Consistent Euler-Bernoulli element matrices for one uniform element.
pub fn element_matrices(ei: f64, rho_a: f64, l: f64) -> Result<(DenseMatrix, DenseMatrix), ModelError> {
    if !(ei > 0.0) {
        return Err(ModelError::NonPositive { field: "EI" });
    }
    if !(rho_a > 0.0) {
        return Err(ModelError::NonPositive { field: "rhoA" });
    }
    if !(l > 0.0) {
        return Err(ModelError::NonPositive { field: "length" });
    }
    let (l2, l3) = (l * l, l * l * l);
    let ks = ei / l3;
    let k_e = DenseMatrix::from_rows(&[
        vec![12.0 * ks, 6.0 * l * ks, -12.0 * ks, 6.0 * l * ks],
        vec![6.0 * l * ks, 4.0 * l2 * ks, -6.0 * l * ks, 2.0 * l2 * ks],
        vec![-12.0 * ks, -6.0 * l * ks, 12.0 * ks, -6.0 * l * ks],
        vec![6.0 * l * ks, 2.0 * l2 * ks, -6.0 * l * ks, 4.0 * l2 * ks],
    ]);
    let ms = rho_a * l / 420.0;
    let m_e = DenseMatrix::from_rows(&[
        vec![156.0 * ms, 22.0 * l * ms, 54.0 * ms, -13.0 * l * ms],
        vec![22.0 * l * ms, 4.0 * l2 * ms, 13.0 * l * ms, -3.0 * l2 * ms],
        vec![54.0 * ms, 13.0 * l * ms, 156.0 * ms, -22.0 * l * ms],
        vec![-13.0 * l * ms, -3.0 * l2 * ms, -22.0 * l * ms, 4.0 * l2 * ms],
    ]);
    Ok((k_e, m_e))
}

/// Assemble the uniform mesh, clamp the root node, and lump the tip mass onto
/// the last translational diagonal entry.
pub fn build_full_model(spec: &BeamSpec) -> Result<FullModel, ModelError> {
    spec.validate()?;
    let ne = spec.element_count;
    let l = spec.length_m / ne as f64;
    let (k_e, m_e) = element_matrices(spec.flexural_rigidity(), spec.mass_per_length(), l)?;

    // Assemble over all nodes (2 DOFs each), then drop the clamped pair.
    let n_all = 2 * (ne + 1);
    let mut k_all = DenseMatrix::zeros(n_all, n_all);
    let mut m_all = DenseMatrix::zeros(n_all, n_all);
    for e in 0..ne {
        let base = 2 * e;
        for i in 0..4 {
            for j in 0..4 {
                k_all[(base + i, base + j)] += k_e[(i, j)];
                m_all[(base + i, base + j)] += m_e[(i, j)];
            }
        }
    }

    let dim = 2 * ne;
    let mut k = DenseMatrix::zeros(dim, dim);
    let mut m = DenseMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            k[(i, j)] = k_all[(i + 2, j + 2)];
            m[(i, j)] = m_all[(i + 2, j + 2)];
        }
    }
    m[(dim - 2, dim - 2)] += spec.tip_mass_kg;

    let dof_map: Vec<(usize, usize)> = (0..ne).map(|j| (2 * j, 2 * j + 1)).collect();
    let node_positions_m: Vec<f64> = (1..=ne).map(|j| j as f64 * l).collect();

    Ok(FullModel {
        spec: *spec,
        m,
        k,
        dof_map,
        node_positions_m,
    })
}

/// Natural frequencies (Hz, ascending) and mass-normalized shapes.
pub fn modal_analysis(model: &FullModel) -> Result<ModalData, ModelError> {
    let eig = eig_sym_generalized(&model.k, &model.m)?;
    let frequencies_hz = eig
        .values
        .iter()
        .map(|&w2| w2.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
        .collect();
    Ok(ModalData {
        frequencies_hz,
        damping_ratios: Vec::new(),
        mode_shapes: eig.vectors,
    })
}

/// Modal damping matrix C = M * Phi * diag(2 zeta_i omega_i) * Phi^T * M.
///
/// `ratios` covers the leading modes; higher modes reuse the last provided
/// ratio — leaving them undamped lets impulsive loading ring unphysically.
pub fn build_damping(
    model: &FullModel,
    frequencies_hz: &[f64],
    ratios: &[f64],
    shapes: &DenseMatrix,
) -> Result<DenseMatrix, ModelError> {
    let n = model.dim();
    if frequencies_hz.len() != n || shapes.rows() != n || shapes.cols() != n {
        return Err(ModelError::ModeCount);
    }
    if ratios.is_empty() || ratios.len() > n {
        return Err(ModelError::RatioCount {
            modes: n,
            given: ratios.len(),
        });
    }
    let last = *ratios.last().expect("nonempty");
    let zeta = |mode: usize| -> f64 {
        if mode < ratios.len() {
            ratios[mode]
        } else {
            last
        }
    };

    // D = Phi * diag(2 zeta omega) * Phi^T, then C = M D M.
    let mut d = DenseMatrix::zeros(n, n);
    for mode in 0..n {
        let omega = 2.0 * std::f64::consts::PI * frequencies_hz[mode];
        let coef = 2.0 * zeta(mode) * omega;
        if coef == 0.0 {
            continue;
        }
        for i in 0..n {
            let phi_i = shapes[(i, mode)];
            if phi_i == 0.0 {
                continue;
            }
            for j in 0..n {
                d[(i, j)] += coef * phi_i * shapes[(j, mode)];
            }
        }
    }
    let mut c = model.m.matmul(&d).matmul(&model.m);
    c.symmetrize();
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_rk45, CholeskyFactor, LuFactor};

    pub(crate) fn reference_spec() -> BeamSpec {
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

    const REFERENCE_RATIOS: [f64; 7] = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];

    #[test]
    fn element_entries_at_unit_arguments() {
        let (k_e, _) = element_matrices(1.0, 1.0, 1.0).unwrap();
        assert_eq!(k_e[(0, 0)], 12.0);
        assert_eq!(k_e[(1, 1)], 4.0);
        let (_, m_e) = element_matrices(1.0, 420.0, 1.0).unwrap();
        assert_eq!(m_e[(0, 0)], 156.0);
        assert!(k_e.is_symmetric() && m_e.is_symmetric());
    }

    #[test]
    fn element_stiffness_has_two_rigid_modes() {
        let (k_e, _) = element_matrices(3.0, 2.0, 0.7).unwrap();
        let eig = eig_sym_generalized(&k_e, &DenseMatrix::identity(4)).unwrap();
        let scale = k_e.max_abs();
        assert!(eig.values[0].abs() < 1e-9 * scale);
        assert!(eig.values[1].abs() < 1e-9 * scale);
        assert!(eig.values[2] > 1e-6 * scale);
    }

    #[test]
    fn full_model_dimensions_and_definiteness() {
        let model = build_full_model(&reference_spec()).unwrap();
        assert_eq!(model.dim(), 30);
        assert!(model.m.is_symmetric());
        assert!(model.k.is_symmetric());
        assert!(CholeskyFactor::new(&model.m).is_ok());
        assert!(CholeskyFactor::new(&model.k).is_ok());
        assert_eq!(model.tip_translation(), 28);
        assert!((model.node_positions_m[14] - 1.524).abs() < 1e-12);
    }

    #[test]
    fn tip_mass_only_touches_one_entry() {
        let with = build_full_model(&reference_spec()).unwrap();
        let without = build_full_model(&BeamSpec {
            tip_mass_kg: 0.0,
            ..reference_spec()
        })
        .unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let expect = if (i, j) == (28, 28) { 0.0522 } else { 0.0 };
                assert!((with.m[(i, j)] - without.m[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_assembly_linear_in_density() {
        let base = BeamSpec {
            tip_mass_kg: 0.0,
            ..reference_spec()
        };
        let doubled = BeamSpec {
            density_kg_m3: 2.0 * base.density_kg_m3,
            ..base
        };
        let m1 = build_full_model(&base).unwrap().m;
        let m2 = build_full_model(&doubled).unwrap().m;
        for i in 0..30 {
            for j in 0..30 {
                assert!((m2[(i, j)] - 2.0 * m1[(i, j)]).abs() <= 1e-9 * m1.max_abs());
            }
        }
    }

    #[test]
    fn first_frequency_matches_continuum_formula() {
        // Uniform cantilever, no tip mass: f1 = (1.8751^2 / 2 pi) sqrt(EI / (rho A L^4)).
        let spec = BeamSpec {
            tip_mass_kg: 0.0,
            element_count: 20,
            ..reference_spec()
        };
        let model = build_full_model(&spec).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let beta = 1.8751040687119611_f64;
        let f_exact = beta * beta / (2.0 * std::f64::consts::PI)
            * (spec.flexural_rigidity() / (spec.mass_per_length() * spec.length_m.powi(4)))
                .sqrt();
        let rel = (modal.frequencies_hz[0] - f_exact).abs() / f_exact;
        assert!(rel < 1e-3, "relative error {rel}");
    }

    #[test]
    fn frequencies_scale_free_in_e_over_rho() {
        let spec = BeamSpec {
            tip_mass_kg: 0.0,
            ..reference_spec()
        };
        let scaled = BeamSpec {
            elastic_modulus_pa: 3.0 * spec.elastic_modulus_pa,
            density_kg_m3: 3.0 * spec.density_kg_m3,
            ..spec
        };
        let f1 = modal_analysis(&build_full_model(&spec).unwrap())
            .unwrap()
            .frequencies_hz;
        let f2 = modal_analysis(&build_full_model(&scaled).unwrap())
            .unwrap()
            .frequencies_hz;
        for (a, b) in f1.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-8 * a);
        }
    }

    #[test]
    fn reference_beam_frequencies() {
        let model = build_full_model(&reference_spec()).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let expected = [2.079, 13.05, 36.61, 71.86, 119.0, 178.1, 249.4];
        for (i, &f_ref) in expected.iter().enumerate() {
            let rel = (modal.frequencies_hz[i] - f_ref).abs() / f_ref;
            assert!(
                rel < 0.02,
                "mode {}: {} Hz vs {} Hz ({:.3}%)",
                i + 1,
                modal.frequencies_hz[i],
                f_ref,
                100.0 * rel
            );
        }
    }

    #[test]
    fn mesh_refinement_moves_frequencies_little() {
        let coarse = modal_analysis(&build_full_model(&reference_spec()).unwrap()).unwrap();
        let fine = modal_analysis(
            &build_full_model(&BeamSpec {
                element_count: 30,
                ..reference_spec()
            })
            .unwrap(),
        )
        .unwrap();
        for mode in 0..7 {
            let rel =
                (coarse.frequencies_hz[mode] - fine.frequencies_hz[mode]).abs() / fine.frequencies_hz[mode];
            assert!(rel < 0.005, "mode {mode} shifted {rel}");
        }
    }

    #[test]
    fn zero_ratios_give_zero_damping() {
        let model = build_full_model(&reference_spec()).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let c = build_damping(&model, &modal.frequencies_hz, &[0.0], &modal.mode_shapes).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn scalar_modal_damping_is_two_zeta_omega_m() {
        // Single-DOF stand-in: m = 1, omega = 2 rad/s, zeta = 0.05 -> c = 0.2.
        let spec = reference_spec();
        let model = FullModel {
            spec,
            m: DenseMatrix::from_rows(&[vec![1.0]]),
            k: DenseMatrix::from_rows(&[vec![4.0]]),
            dof_map: vec![(0, 0)],
            node_positions_m: vec![1.0],
        };
        let freq = 2.0 / (2.0 * std::f64::consts::PI);
        let c = build_damping(
            &model,
            &[freq],
            &[0.05],
            &DenseMatrix::from_rows(&[vec![1.0]]),
        )
        .unwrap();
        assert!((c[(0, 0)] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn modal_damping_is_diagonal_in_modal_space() {
        let model = build_full_model(&reference_spec()).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let c = build_damping(
            &model,
            &modal.frequencies_hz,
            &REFERENCE_RATIOS,
            &modal.mode_shapes,
        )
        .unwrap();
        assert!(c.is_symmetric());
        let pc = modal.mode_shapes.transpose().matmul(&c).matmul(&modal.mode_shapes);
        let diag_scale = (0..30).map(|i| pc[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..30 {
            for j in 0..30 {
                if i != j {
                    assert!(
                        pc[(i, j)].abs() < 1e-8 * diag_scale,
                        "off-diagonal leakage at ({i},{j})"
                    );
                }
            }
        }
        // Diagonal entries are 2 zeta omega with the trailing extension rule.
        for mode in 0..30 {
            let zeta = if mode < 7 { REFERENCE_RATIOS[mode] } else { 0.0042 };
            let omega = 2.0 * std::f64::consts::PI * modal.frequencies_hz[mode];
            let rel = (pc[(mode, mode)] - 2.0 * zeta * omega).abs() / (2.0 * zeta * omega);
            assert!(rel < 1e-8, "mode {mode} diagonal off by {rel}");
        }
    }

    #[test]
    fn free_decay_log_decrement_recovers_first_ratio() {
        let model = build_full_model(&reference_spec()).unwrap();
        let modal = modal_analysis(&model).unwrap();
        let c = build_damping(
            &model,
            &modal.frequencies_hz,
            &REFERENCE_RATIOS,
            &modal.mode_shapes,
        )
        .unwrap();
        let n = model.dim();

        let m_lu = LuFactor::new(&model.m).unwrap();
        let m_inv_k = m_lu.solve_mat(&model.k);
        let m_inv_c = m_lu.solve_mat(&c);

        // Mode-1 initial displacement scaled to ~1 mm at the tip.
        let tip = model.tip_translation();
        let phi1 = modal.mode_shapes.column(0);
        let scale = 1e-3 / phi1[tip];
        let mut y0 = vec![0.0; 2 * n];
        for i in 0..n {
            y0[i] = scale * phi1[i];
        }

        let t_end = 3.0;
        let grid: Vec<f64> = (0..6001).map(|i| i as f64 * t_end / 6000.0).collect();
        let sol = integrate_rk45(
            |_t, y, dy| {
                let (q, v) = y.split_at(n);
                let kq = m_inv_k.matvec(q);
                let cv = m_inv_c.matvec(v);
                for i in 0..n {
                    dy[i] = v[i];
                    dy[n + i] = -kq[i] - cv[i];
                }
            },
            &y0,
            (0.0, t_end),
            1e-8,
            1e-8,
            &grid,
        )
        .unwrap();

        // Successive positive peaks of the tip displacement.
        let tip_series: Vec<f64> = (0..grid.len()).map(|g| sol.states[(g, tip)]).collect();
        let mut peaks = Vec::new();
        for g in 1..grid.len() - 1 {
            if tip_series[g] > tip_series[g - 1]
                && tip_series[g] >= tip_series[g + 1]
                && tip_series[g] > 0.0
            {
                peaks.push(tip_series[g]);
            }
        }
        assert!(peaks.len() >= 4, "expected several decay peaks");
        let mut decs = Vec::new();
        for w in peaks.windows(2) {
            decs.push((w[0] / w[1]).ln());
        }
        let delta = decs.iter().sum::<f64>() / decs.len() as f64;
        let zeta_est = delta / (4.0 * std::f64::consts::PI.powi(2) + delta * delta).sqrt();
        let rel = (zeta_est - 0.0069).abs() / 0.0069;
        assert!(rel < 0.05, "log-decrement ratio {zeta_est} vs 0.0069 ({rel})");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = reference_spec();
        spec.thickness_m = -1.0;
        match build_full_model(&spec) {
            Err(ModelError::NonPositive { field }) => assert_eq!(field, "thickness_m"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let spec = BeamSpec {
            element_count: 0,
            ..reference_spec()
        };
        assert!(matches!(build_full_model(&spec), Err(ModelError::NoElements)));
    }
}
