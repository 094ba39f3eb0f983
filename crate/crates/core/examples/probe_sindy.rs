// Scratch probe: baseline behavior across thresholds on the reference record.
use siva::beam::{build_damping, build_full_model, modal_analysis, BeamSpec};
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{make_datasets, AttachmentSpec, GridSpec};

fn main() {
    let spec = BeamSpec::default();
    let model = build_full_model(&spec).unwrap();
    let modal = modal_analysis(&model).unwrap();
    let ratios = [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];
    let c = build_damping(&model, &modal.frequencies_hz, &ratios, &modal.mode_shapes).unwrap();
    let attachment = AttachmentSpec::default();
    let grid = GridSpec::default();
    let data = make_datasets(&model, &c, &attachment, 0.00635, 2000.0, &[1000.0, 3000.0], &grid)
        .unwrap();
    let masters = select_translational(&model);
    let reduced = guyan_reduce(&model, &c, &masters).unwrap();

    for threshold in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5] {
        match siva::sindy::identify(&reduced, &data.training, threshold) {
            Ok(rep) => {
                let k = rep.attachment;
                let active = rep.coefficients.iter().filter(|&&v| v != 0.0).count();
                eprintln!(
                    "thr {threshold:<5} active {active:2} iters {} k1 {:.4e} k2 {:.4e} k3 {:.4e} k4 {:.4e} k5 {:.4e} resim {:?} warn {}",
                    rep.iterations, k.k1, k.k2, k.k3, k.k4, k.k5, rep.resim_mse_m2, rep.warnings.len()
                );
            }
            Err(e) => eprintln!("thr {threshold}: ERROR {e}"),
        }
    }
}
