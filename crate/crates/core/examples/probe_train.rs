// Scratch convergence probe for the full identification pipeline.
use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{make_datasets, AttachmentSpec, GridSpec};
use siva::siva::{approach_i, approach_ii, select_best, train, TrainingConfig};
use std::time::Instant;

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

    let t0 = Instant::now();
    let attachment = AttachmentSpec {
        k_lin_n_per_m: 1.1e4,
        k_nl_n_per_m3: 1.0e8,
    };
    let grid = GridSpec {
        duration_s: 4.0,
        rate_hz: 2000.0,
    };
    let data = make_datasets(&model, &c, &attachment, 0.00635, 2000.0, &[1000.0, 3000.0], &grid)
        .unwrap();
    eprintln!("simulation: {:.1?}", t0.elapsed());

    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &c, &masters).unwrap();

    let cfg = TrainingConfig::default();
    let t1 = Instant::now();
    let state = train(&cfg, &reduced, &data.training, &data.validation).unwrap();
    eprintln!("training: {:.1?}", t1.elapsed());

    for r in state.records.iter().step_by(25) {
        eprintln!(
            "epoch {:4}  L_D {:.4}  L_adv {:.4}  L_MSE {:.6e}  k1 {:.6e}  k3 {:.6e}  k2 {:.3e} k4 {:.3e} k5 {:.3e}",
            r.epoch, r.l_d, r.l_adv, r.l_mse, r.lambda.k1, r.lambda.k3,
            r.lambda.k2, r.lambda.k4, r.lambda.k5
        );
    }
    let last = state.records.last().unwrap();
    eprintln!(
        "final epoch {}  L_D {:.4}  L_adv {:.4}  L_MSE {:.6e}",
        last.epoch, last.l_d, last.l_adv, last.l_mse
    );
    let d100: Vec<&siva::siva::EpochRecord> =
        state.records.iter().rev().take(100).collect();
    let mean_ld = d100.iter().map(|r| r.l_d).sum::<f64>() / d100.len() as f64;
    let mean_ladv = d100.iter().map(|r| r.l_adv).sum::<f64>() / d100.len() as f64;
    eprintln!("trailing-100 mean L_D {mean_ld:.4}  L_adv {mean_ladv:.4}");

    let est1 = approach_i(&state, 1000).unwrap();
    eprintln!(
        "approach I : k1 {:.6e} (std {:.2e})  k3 {:.6e} (std {:.2e}) k2 {:.3e} k4 {:.3e} k5 {:.3e}",
        est1.values.k1, est1.std_dev.k1, est1.values.k3, est1.std_dev.k3,
        est1.values.k2, est1.values.k4, est1.values.k5
    );
    let est2 = approach_ii(&state, cfg.approach_ii_start_epoch).unwrap();
    eprintln!(
        "approach II: k1 {:.6e} (std {:.2e})  k3 {:.6e} (std {:.2e})",
        est2.values.k1, est2.std_dev.k1, est2.values.k3, est2.std_dev.k3
    );

    let mut cands = vec![est1, est2];
    let best = select_best(&mut cands, &reduced, &data.training).unwrap();
    for c in &cands {
        eprintln!("{:?} resim MSE {:?}", c.method, c.resim_mse_m2);
    }
    eprintln!("best: {:?} k1 {:.6e} k3 {:.6e}", best.method, best.values.k1, best.values.k3);

    // Criterion-8 quantities: full-model resim at the validation amplitudes,
    // relative L2 of tip displacement against the exact records.
    let coeffs = best.values.as_array();
    for val in &data.validation {
        let resim =
            siva::simulate::simulate_full_poly(&model, &c, &coeffs, &val.forcing, &grid).unwrap();
        let exact = val.tip_displacement();
        let got = resim.tip_displacement();
        let m = exact.len().min(got.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            num += (got[i] - exact[i]).powi(2);
            den += exact[i].powi(2);
        }
        eprintln!(
            "validation {:.0} N: rel L2 {:.4e}",
            val.forcing.amplitude_n,
            (num / den).sqrt()
        );
    }
    eprintln!("total: {:.1?}", t0.elapsed());
}
