//! Scratch probe: exact 5-variable least-squares floor of the
//! acceleration objective, the restoring-force shape error of that floor,
//! and its full-model resimulation quality at the validation amplitudes.

use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::numerics::{eig_sym_generalized, DenseMatrix};
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
    let damping =
        build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
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

    // Normal equations of the full 5-variable objective
    //   L(k) = sum_t || lin(t) + s p_k(q_t) - meas(t) ||^2,
    // where p_k(q) = sum_i k_i q^i enters every DOF through s:
    //   G[i][m] = S2 * M_{i+m+2},  rhs[i] = sum_t q^{i+1} rho_t,
    //   rho_t = sum_j s_j (meas_j - lin_j),  S2 = sum_j s_j^2.
    let physics = PhysicsLayer::new(&reduced).unwrap();
    let s = physics.tip_sensitivity().to_vec();
    let s2: f64 = s.iter().map(|v| v * v).sum();
    let record = &data.training;
    let dim = reduced.dim();
    let app = reduced
        .master_dofs
        .iter()
        .position(|&d| d == record.forcing.application_dof)
        .unwrap();
    let mut f = vec![0.0; dim];
    let mut moments = [0.0f64; 11];
    let mut b = [0.0f64; 5];
    let mut floor0 = 0.0;
    for t in 0..record.len() {
        f[app] = half_sine(&record.forcing, record.times_s[t]);
        let lin = physics
            .linear_accel(record.q.row(t), record.qd.row(t), &f)
            .unwrap();
        let meas = record.qdd.row(t);
        let q = record.q.row(t)[reduced.tip_index];
        let mut rho = 0.0;
        for j in 0..dim {
            let d = meas[j] - lin[j];
            rho += s[j] * d;
            floor0 += d * d;
        }
        let mut p = 1.0;
        for (i, m) in moments.iter_mut().enumerate() {
            *m += p;
            p *= q;
            if i < 5 {
                b[i] += p * rho; // q^{i+1} * rho
            }
        }
        f[app] = 0.0;
    }

    let q_rms = (moments[2] / moments[0]).sqrt();
    println!("q_rms {q_rms:.6e}  S2 {s2:.6e}  L0 {floor0:.6e}");
    let scale: Vec<f64> = (1..=5).map(|i| q_rms.powi(i as i32)).collect();
    let mut g = DenseMatrix::zeros(5, 5);
    for i in 0..5 {
        for m in 0..5 {
            g[(i, m)] = s2 * moments[i + m + 2] * scale[i] * scale[m];
        }
    }

    let ident5 = DenseMatrix::identity(5);
    let eig = eig_sym_generalized(&g, &ident5).unwrap();
    println!("gram eigenvalues (scaled basis):");
    for i in 0..5 {
        println!("  lambda_{i} = {:.6e}", eig.values[i]);
    }

    let loss_ratio = |k: &[f64]| {
        let mut quad = 0.0;
        for i in 0..5 {
            for m in 0..5 {
                quad += k[i] * s2 * moments[i + m + 2] * k[m];
            }
        }
        let mut lin_term = 0.0;
        for (i, ki) in k.iter().enumerate() {
            lin_term += ki * b[i];
        }
        (floor0 - 2.0 * lin_term + quad) / floor0
    };

    // Truncated pseudo-inverse floors at several spectral cutoffs.
    let mut floor5 = [0.0f64; 5];
    for &keep in &[5usize, 4, 3, 2] {
        let mut y = [0.0f64; 5];
        for idx in (5 - keep)..5 {
            let mut proj = 0.0;
            for r in 0..5 {
                proj += eig.vectors[(r, idx)] * b[r] * scale[r];
            }
            let w = proj / eig.values[idx];
            for r in 0..5 {
                y[r] += w * eig.vectors[(r, idx)];
            }
        }
        let k: Vec<f64> = (0..5).map(|i| y[i] * scale[i]).collect();
        if keep == 5 {
            floor5.copy_from_slice(&k);
        }
        println!(
            "keep {keep}: k1 {:+.4}%  k2 {:+.3e}  k3 {:+.4}%  k4 {:+.3e}  k5 {:+.3e}  L/L0 {:.4e}",
            100.0 * (k[0] / 1.1e4 - 1.0),
            k[1],
            100.0 * (k[2] / 1e8 - 1.0),
            k[3],
            k[4],
            loss_ratio(&k)
        );
    }

    println!(
        "L/L0 truth           {:.6e}",
        loss_ratio(&[1.1e4, 0.0, 1e8, 0.0, 0.0])
    );
    println!(
        "L/L0 gan-stationary  {:.6e}",
        loss_ratio(&[1.1e4 * (1.0 - 0.00188), -969.0, 1e8 * (1.0 + 0.0045), 1.979e4, 2.1e8])
    );
    println!(
        "L/L0 seed42 AII      {:.6e}",
        loss_ratio(&[1.098917e4, -969.2, 1.001727e8, 1.979e4, 2.1e8])
    );

    println!("restoring-force shape error of 5-var floor vs truth:");
    let shape = |k: &[f64], q: f64| {
        let mut p = 0.0;
        let mut qq = 1.0;
        for ki in k {
            qq *= q;
            p += ki * qq;
        }
        p
    };
    for &q in &[0.005f64, 0.01, 0.02, 0.0325, 0.045, 0.05] {
        let gt = shape(&[1.1e4, 0.0, 1e8, 0.0, 0.0], q);
        let gf = shape(&floor5, q);
        println!("  q {q:.4}: {:+.4e} rel", (gf - gt) / gt);
    }

    let lam = [floor5[0], floor5[1], floor5[2], floor5[3], floor5[4]];
    let results: Vec<(f64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = data
            .validation
            .iter()
            .map(|val| {
                let model = &model;
                let damping = &damping;
                let grid = &grid;
                let lam = lam;
                scope.spawn(move || {
                    let resim =
                        simulate_full_poly(model, damping, &lam, &val.forcing, grid).unwrap();
                    (
                        val.forcing.amplitude_n,
                        rel_l2(&val.tip_displacement(), &resim.tip_displacement()),
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (amp, rl2) in results {
        println!("floor resim rel L2 @{amp:.0} N: {rl2:.4e}");
    }
}
