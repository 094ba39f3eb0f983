// Scratch probe: isolate the generator's reconstruction-only dynamics to
// find what limits the convergence speed of the exponent channel.
use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::numerics::DenseMatrix;
use siva::nn::{adam_step, init_mlp, AdamState, OutputActivation, RngStream};
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{make_datasets, AttachmentSpec, GridSpec, TrajectorySet};
use siva::siva::{MseObjective, ParameterVector, SciNotationOutput};
use std::time::Instant;

const LN10: f64 = std::f64::consts::LN_10;

struct Variant {
    name: &'static str,
    lr: f64,
    passes_per_epoch: usize,
    epochs: usize,
}

fn run_variant(v: &Variant, objective: &MseObjective, n_samples: usize) {
    println!("=== {} (lr {:.0e}, {} passes/epoch, {} epochs)", v.name, v.lr, v.passes_per_epoch, v.epochs);
    let mut rng = RngStream::new(42);
    let mut gen = init_mlp(&[16, 64, 32, 16, 10], OutputActivation::Linear, &mut rng).unwrap();
    let mut adam = AdamState::new(&gen, v.lr);
    let batch = 500usize;
    let mut order: Vec<usize> = (0..n_samples).collect();
    let zero = DenseMatrix::zeros(1, 16);
    let t0 = Instant::now();
    for epoch in 1..=v.epochs {
        let mut pos_frac_sum = 0.0;
        let mut steps = 0usize;
        let mut b3_sum = 0.0;
        let mut b3_sq = 0.0;
        let mut nb = 0usize;
        for _pass in 0..v.passes_per_epoch {
            rng.shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let mut z = DenseMatrix::zeros(batch, 16);
                rng.fill_normal(z.as_mut_slice());
                let (out, cache) = gen.forward(&z);
                let mut ks = Vec::with_capacity(batch);
                let mut scis = Vec::with_capacity(batch);
                for r in 0..batch {
                    let sci = SciNotationOutput::from_network_row(out.row(r));
                    ks.push(sci.compose());
                    scis.push(sci);
                    b3_sum += out.row(r)[5];
                    b3_sq += out.row(r)[5] * out.row(r)[5];
                    nb += 1;
                }
                let (_, k_grads) = objective.loss_and_k_grads(&ks, chunk);
                let pos = k_grads.iter().filter(|g| g[2] > 0.0).count();
                pos_frac_sum += pos as f64 / batch as f64;
                steps += 1;
                let mut og = DenseMatrix::zeros(batch, 10);
                for r in 0..batch {
                    let ka = ks[r].as_array();
                    for m in 0..5 {
                        let gk = k_grads[r][m];
                        og[(r, 2 * m)] = gk * 10f64.powf(scis[r].exponent[m]);
                        og[(r, 2 * m + 1)] = gk * ka[m] * LN10;
                    }
                }
                let (grads, _) = gen.backward(&cache, &og);
                adam_step(&mut gen, &grads, &mut adam);
            }
        }
        if epoch % 20 == 0 || epoch == 1 {
            let (c, _) = gen.forward(&zero);
            let ck = SciNotationOutput::from_network_row(c.row(0)).compose();
            let b3_mean = b3_sum / nb as f64;
            let b3_std = (b3_sq / nb as f64 - b3_mean * b3_mean).max(0.0).sqrt();
            // mean composed over a fresh probe batch
            let mut zp = DenseMatrix::zeros(1000, 16);
            let mut prng = RngStream::new(7);
            prng.fill_normal(zp.as_mut_slice());
            let (po, _) = gen.forward(&zp);
            let mut mk1 = 0.0;
            let mut mk3 = 0.0;
            for r in 0..1000 {
                let k = SciNotationOutput::from_network_row(po.row(r)).compose();
                mk1 += k.k1 / 1000.0;
                mk3 += k.k3 / 1000.0;
            }
            let full = objective.full_loss(&ParameterVector {
                k1: mk1, k2: 0.0, k3: mk3, k4: 0.0, k5: 0.0,
            });
            let mut m = [0.0; 5];
            for r in 0..1000 {
                let k = SciNotationOutput::from_network_row(po.row(r)).compose().as_array();
                for (mm, kk) in m.iter_mut().zip(k) {
                    *mm += kk / 1000.0;
                }
            }
            println!(
                "ep {:4}  central k1 {:.3e} k3 {:.3e} | mean k1 {:.3e} k3 {:.3e} | k2 {:.2e} k4 {:.2e} k5 {:.2e} | b3 {:.3}±{:.3} | pos-frac {:.2} | L(mean) {:.3e}",
                epoch, ck.k1, ck.k3, mk1, mk3, m[1], m[3], m[4], b3_mean, b3_std,
                pos_frac_sum / steps as f64, full
            );
        }
    }
    println!("--- {} done in {:.1?}\n", v.name, t0.elapsed());
}

fn main() {
    let spec = BeamSpec {
        elastic_modulus_pa: 180e9,
        density_kg_m3: 7800.0,
        length_m: 1.524,
        width_m: 0.0381,
        thickness_m: 0.0064,
        element_count: 15,
        tip_mass_kg: 0.0522,
    };
    let model = build_full_model(&spec).unwrap();
    let modal = modal_analysis(&model).unwrap();
    let ratios = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];
    let c = build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
    let attachment = AttachmentSpec { k_lin_n_per_m: 1.1e4, k_nl_n_per_m3: 1.0e8 };
    let grid = GridSpec { duration_s: 4.0, rate_hz: 2000.0 };
    let data = make_datasets(&model, &c, &attachment, 0.00635, 2000.0, &[1000.0, 3000.0], &grid).unwrap();
    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &c, &masters).unwrap();
    let training: &TrajectorySet = &data.training;
    let objective = MseObjective::new(&reduced, training).unwrap();
    let n = training.len();
    let q_star = training
        .tip_displacement()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    println!("q* = {q_star:.4e} m, samples {n}");

    // Unconstrained least-squares optimum over the full record: solve
    // ∇L = −2u + 2cQk = 0 for all five coefficients.
    let all: Vec<usize> = (0..n).collect();
    let probe_ks: Vec<ParameterVector> = (0..5)
        .map(|i| {
            let mut a = [0.0; 5];
            a[i] = 1.0;
            ParameterVector::from_array(a)
        })
        .collect();
    let (_, unit_grads) = objective.loss_and_k_grads(&probe_ks, &all);
    let (_, zero_grad) = objective.loss_and_k_grads(&[ParameterVector::ZERO], &all);
    // grad_i(k=e_j) − grad_i(0) = 2c·Q_ij/denom (scaled); rhs = −grad(0) = 2u/denom.
    let mut a_mat = DenseMatrix::zeros(5, 5);
    let mut rhs = [0.0; 5];
    for j in 0..5 {
        for i in 0..5 {
            a_mat[(i, j)] = unit_grads[j][i] * 5.0 - zero_grad[0][i];
        }
    }
    // zero_grad n_cand = 1, unit_grads n_cand = 5: rescale unit grads by 5 above.
    for i in 0..5 {
        rhs[i] = -zero_grad[0][i];
    }
    let rhs_m = {
        let mut m = DenseMatrix::zeros(5, 1);
        for i in 0..5 { m[(i, 0)] = rhs[i]; }
        m
    };
    match siva::numerics::solve_linear(&a_mat, &rhs_m) {
        Ok(kstar) => {
            let ka = [kstar[(0,0)], kstar[(1,0)], kstar[(2,0)], kstar[(3,0)], kstar[(4,0)]];
            println!(
                "L_MSE-optimal λ*: k1 {:.6e} k2 {:.3e} k3 {:.6e} k4 {:.3e} k5 {:.3e}\n  L(λ*) {:.4e}  vs L(truth) {:.4e}",
                ka[0], ka[1], ka[2], ka[3], ka[4],
                objective.full_loss(&ParameterVector::from_array(ka)),
                objective.full_loss(&ParameterVector::from_array([1.1e4, 0.0, 1e8, 0.0, 0.0]))
            );
        }
        Err(e) => println!("normal-equation solve failed: {e}"),
    }

    let variants = [
        Variant { name: "B6-long", lr: 1e-4, passes_per_epoch: 6, epochs: 1000 },
    ];
    for v in &variants {
        run_variant(v, &objective, n);
    }
}
