//! Scratch probe: where does the acceleration-objective floor bias come
//! from? Three diagnostics:
//!   1. data generated by the REDUCED model itself → floor must be truth
//!      (sign/routing bug check);
//!   2. floors computed with the earliest samples excluded → temporal
//!      localization of the bias;
//!   3. floor restricted to (k1,k3) as reference on the full data.

use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::numerics::{solve_linear, DenseMatrix};
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{
    half_sine, simulate_full_poly, simulate_reduced, AttachmentSpec, ForcingSpec, GridSpec,
    TrajectorySet,
};
use siva::siva::PhysicsLayer;

struct Floor {
    k1_pct: f64,
    k3_pct: f64,
}

fn restricted_floor(
    physics: &PhysicsLayer,
    reduced: &siva::reduction::ReducedModel,
    record: &TrajectorySet,
    skip_t: f64,
) -> Floor {
    let s = physics.tip_sensitivity().to_vec();
    let c: f64 = s.iter().map(|v| v * v).sum();
    let dim = reduced.dim();
    let app = reduced
        .master_dofs
        .iter()
        .position(|&d| d == record.forcing.application_dof)
        .unwrap();
    let (mut m11, mut m13, mut m33, mut b1, mut b3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut f = vec![0.0; dim];
    for t in 0..record.len() {
        if record.times_s[t] < skip_t {
            continue;
        }
        f[app] = half_sine(&record.forcing, record.times_s[t]);
        let lin = physics
            .linear_accel(record.q.row(t), record.qd.row(t), &f)
            .unwrap();
        let meas = record.qdd.row(t);
        let mut a_t = 0.0;
        for j in 0..dim {
            a_t += s[j] * (meas[j] - lin[j]);
        }
        let q = record.q.row(t)[reduced.tip_index];
        let q3 = q * q * q;
        m11 += q * q;
        m13 += q * q3;
        m33 += q3 * q3;
        b1 += a_t * q;
        b3 += a_t * q3;
        f[app] = 0.0;
    }
    let mat = DenseMatrix::from_rows(&[vec![c * m11, c * m13], vec![c * m13, c * m33]]);
    let rhs = DenseMatrix::from_rows(&[vec![b1], vec![b3]]);
    let sol = solve_linear(&mat, &rhs).unwrap();
    let (mut k1, mut k3) = (sol.row(0)[0], sol.row(1)[0]);
    if (k1 - 1.1e4).abs() > 0.5e4 {
        k1 = -k1;
        k3 = -k3;
    }
    Floor {
        k1_pct: 100.0 * (k1 / 1.1e4 - 1.0),
        k3_pct: 100.0 * (k3 / 1e8 - 1.0),
    }
}

fn main() {
    let spec = BeamSpec::default();
    let model = build_full_model(&spec).unwrap();
    let modal = modal_analysis(&model).unwrap();
    let ratios = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];
    let damping =
        build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
    let attachment = AttachmentSpec::default();
    let grid = GridSpec::default();
    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &damping, &masters).unwrap();
    let physics = PhysicsLayer::new(&reduced).unwrap();
    let forcing = ForcingSpec {
        amplitude_n: 2000.0,
        duration_s: 0.00635,
        application_dof: model.tip_translation(),
        start_time_s: 0.0,
    };

    // 1. Self-consistent data: simulate the REDUCED nonlinear model and run
    // the floor on it. Any deviation from truth is a plumbing bug.
    let self_data = simulate_reduced(&reduced, &[1.1e4, 0.0, 1e8, 0.0, 0.0], &forcing, &grid).unwrap();
    let fl = restricted_floor(&physics, &reduced, &self_data, -1.0);
    println!(
        "reduced-generated data floor: k1 {:+.6}%  k3 {:+.6}%   (bug check: expect ~0)",
        fl.k1_pct, fl.k3_pct
    );

    // 2. Full-model data floors with early samples progressively excluded.
    let full = simulate_full_poly(
        &model,
        &damping,
        &[1.1e4, 0.0, 1e8, 0.0, 0.0],
        &forcing,
        &grid,
    )
    .unwrap();
    for &skip in &[0.0f64, 0.00635, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let fl = restricted_floor(&physics, &reduced, &full, skip);
        println!(
            "full-data floor, skip t<{:>5.3} s: k1 {:+.4}%  k3 {:+.4}%",
            skip, fl.k1_pct, fl.k3_pct
        );
    }
}
