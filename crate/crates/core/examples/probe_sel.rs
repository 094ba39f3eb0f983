//! Scratch probe: does reduced-model resimulation MSE (the select_best
//! ranking metric) have its minimum close enough to the true coefficients
//! that selecting by it satisfies the validation rel-L2 bound?

use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::numerics::eig_sym_generalized;
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{
    make_datasets, simulate_full_poly, simulate_reduced, AttachmentSpec, GridSpec,
};
use siva::spectral::tip_mse;

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
    let data = make_datasets(&model, &damping, &attachment, 0.00635, 2000.0, &[1000.0, 3000.0], &grid).unwrap();
    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &damping, &masters).unwrap();
    eprintln!("datasets + reduction ready");

    // Attached-system linearized frequency bias of the reduced model at a
    // few effective stiffness levels.
    for k_eff in [1.1e4, 4.1e4, 1.6e5] {
        let tip_full = model.tip_translation();
        let mut k_full = model.k.clone();
        let n = k_full.cols();
        k_full.as_mut_slice()[tip_full * n + tip_full] += k_eff;
        let full_eig = eig_sym_generalized(&k_full, &model.m).unwrap();
        let mut k_red = reduced.k_r.clone();
        let nr = k_red.cols();
        k_red.as_mut_slice()[reduced.tip_index * nr + reduced.tip_index] += k_eff;
        let red_eig = eig_sym_generalized(&k_red, &reduced.m_r).unwrap();
        let f_full = full_eig.values[0].sqrt();
        let f_red = red_eig.values[0].sqrt();
        eprintln!(
            "k_eff {k_eff:.2e}: attached mode-1 {:.4} Hz full, reduced bias {:+.5}%",
            f_full / (2.0 * std::f64::consts::PI),
            (f_red - f_full) / f_full * 100.0
        );
    }

    let candidates: Vec<(&str, [f64; 5])> = vec![
        ("truth        ", [1.1e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k1 -0.05%    ", [1.09945e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k1 -0.1%     ", [1.0989e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k1 +0.05%    ", [1.10055e4, 0.0, 1.0e8, 0.0, 0.0]),
        ("k3 -0.1%     ", [1.1e4, 0.0, 9.99e7, 0.0, 0.0]),
        ("k3 +0.1%     ", [1.1e4, 0.0, 1.001e8, 0.0, 0.0]),
        ("k3 -0.2%     ", [1.1e4, 0.0, 9.98e7, 0.0, 0.0]),
        ("probe AII    ", [1.098917e4, 0.0, 1.001727e8, 0.0, 0.0]),
        ("equilibrium  ", [1.0972e4, -7.0e2, 1.0055e8, -7.0e2, 1.1e8]),
        ("LS floor     ", [1.101370e4, 0.0, 9.982438e7, 0.0, 0.0]),
        ("k1-.04 k3-.05", [1.09956e4, 0.0, 9.9950e7, 0.0, 0.0]),
        ("probe AI     ", [1.100230e4, -5.917e2, 9.933829e7, -7.641e2, 1.183e8]),
    ];

    let results: Vec<(String, f64, Vec<f64>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .iter()
            .map(|(name, coeffs)| {
                let model = &model;
                let damping = &damping;
                let data = &data;
                let grid = &grid;
                let reduced = &reduced;
                scope.spawn(move || {
                    let train_resim =
                        simulate_reduced(reduced, coeffs, &data.training.forcing, grid).unwrap();
                    let mse = tip_mse(
                        &data.training.tip_displacement(),
                        &train_resim.tip_displacement(),
                    )
                    .unwrap();
                    let mut rels = Vec::new();
                    for val in &data.validation {
                        let resim =
                            simulate_full_poly(model, damping, coeffs, &val.forcing, grid).unwrap();
                        rels.push(rel_l2(&val.tip_displacement(), &resim.tip_displacement()));
                    }
                    (name.to_string(), mse, rels)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    println!("candidate       train-resim-MSE  relL2@1kN   relL2@3kN");
    for (name, mse, rels) in results {
        println!("{name}  {mse:.6e}    {:.4e}  {:.4e}", rels[0], rels[1]);
    }
}
