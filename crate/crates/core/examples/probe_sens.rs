//! Scratch probe: sensitivity of validation rel-L2 to coefficient errors,
//! plus the restricted least-squares identifiability floor of the
//! acceleration-MSE objective.

use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::numerics::{solve_linear, DenseMatrix};
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{half_sine, make_datasets, simulate_full_poly, AttachmentSpec, GridSpec};
use siva::siva::PhysicsLayer;

fn rel_l2(reference: &[f64], candidate: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..reference.len() {
        let d = candidate[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    (num / den).sqrt()
}

fn main() {
    let spec = BeamSpec::default();
    let model = build_full_model(&spec).unwrap();
    let modal = modal_analysis(&model).unwrap();
    let ratios = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];
    let damping = build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
    let attachment = AttachmentSpec::default();
    let grid = GridSpec::default();
    let data = make_datasets(
        &model,
        &damping,
        &attachment,
        0.00635,
        2000.0,
        &[1000.0, 3000.0],
        &grid,
    )
    .unwrap();
    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &damping, &masters).unwrap();
    eprintln!("datasets + reduction ready");

    // Restricted LS on the acceleration objective: minimize
    // sum_t || lin(t) + s p_t - meas(t) ||^2 over p_t = k1 q + k3 q^3.
    let physics = PhysicsLayer::new(&reduced).unwrap();
    let s = physics.tip_sensitivity().to_vec();
    let c: f64 = s.iter().map(|v| v * v).sum();
    let record = &data.training;
    let dim = reduced.dim();
    let app = reduced
        .master_dofs
        .iter()
        .position(|&d| d == record.forcing.application_dof)
        .unwrap();
    let mut m11 = 0.0;
    let mut m13 = 0.0;
    let mut m33 = 0.0;
    let mut b1 = 0.0;
    let mut b3 = 0.0;
    let mut f = vec![0.0; dim];
    for t in 0..record.len() {
        f[app] = half_sine(&record.forcing, record.times_s[t]);
        let lin = physics.linear_accel(record.q.row(t), record.qd.row(t), &f).unwrap();
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
    // c * [m11 m13; m13 m33] [k1; k3] = -[b1; b3] (s = -M^{-1} e_N, and
    // lin + s*p with p the restoring polynomial means a_t = -c_eff * p).
    // Solve both sign conventions and report the one near truth.
    let mat = DenseMatrix::from_rows(&[vec![c * m11, c * m13], vec![c * m13, c * m33]]);
    let rhs = DenseMatrix::from_rows(&[vec![b1], vec![b3]]);
    let sol = solve_linear(&mat, &rhs).unwrap();
    let (ls_k1, ls_k3) = (sol.row(0)[0], sol.row(1)[0]);
    eprintln!(
        "LS floor (sign A): k1 {ls_k1:.6e} ({:+.4}%)  k3 {ls_k3:.6e} ({:+.4}%)",
        (ls_k1 - 1.1e4) / 1.1e4 * 100.0,
        (ls_k3 - 1e8) / 1e8 * 100.0
    );
    let (fl_k1, fl_k3) = if (ls_k1 - 1.1e4).abs() < 0.5e4 {
        (ls_k1, ls_k3)
    } else {
        (-ls_k1, -ls_k3)
    };
    eprintln!(
        "LS floor used   : k1 {fl_k1:.6e} ({:+.4}%)  k3 {fl_k3:.6e} ({:+.4}%)",
        (fl_k1 - 1.1e4) / 1.1e4 * 100.0,
        (fl_k3 - 1e8) / 1e8 * 100.0
    );

    let candidates: Vec<(&str, [f64; 5])> = vec![
        ("truth          ", [1.1e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("probe ApproachI", [1.100230e4, -5.917e2, 9.933829e7, -7.641e2, 1.183e8]),
        ("probe ApproachII", [1.098917e4, 0.0, 1.001727e8, 0.0, 0.0]),
        ("k1 +0.1%       ", [1.1011e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k1 +0.02%      ", [1.10022e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k3 +0.2%       ", [1.1e4, 0.0, 1.002e8, 0.0, 0.0]),
        ("k3 -0.66%      ", [1.1e4, 0.0, 9.934e7, 0.0, 0.0]),
        ("paper-like     ", [1.1e4, 0.0, 9.9941e7, 0.0, 0.0]),
        ("LS floor       ", [fl_k1, 0.0, fl_k3, 0.0, 0.0]),
    ];

    let results: Vec<(String, Vec<f64>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .iter()
            .map(|(name, coeffs)| {
                let model = &model;
                let damping = &damping;
                let data = &data;
                let grid = &grid;
                scope.spawn(move || {
                    let mut rels = Vec::new();
                    for val in &data.validation {
                        let resim =
                            simulate_full_poly(model, damping, coeffs, &val.forcing, grid).unwrap();
                        rels.push(rel_l2(&val.tip_displacement(), &resim.tip_displacement()));
                    }
                    (name.to_string(), rels)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    println!("candidate           relL2@1kN   relL2@3kN");
    for (name, rels) in results {
        println!("{name}  {:.4e}  {:.4e}", rels[0], rels[1]);
    }
}
