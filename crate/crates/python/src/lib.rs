//! Python bindings: a thin layer over the core crate exposing the model
//! builder, simulation, spectral helpers, and the staged identification
//! pipeline. Structured values cross the boundary as JSON strings so the
//! Python side can use plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use siva::cli::{self, CliError, ExperimentConfig, Stage};
use siva::numerics::eig_sym_generalized;
use siva::reduction::{guyan_reduce, select_translational};
use siva::simulate::{simulate_full, DatasetLabel, ForcingSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(_) => value_err(e),
        CliError::Stage { .. } => runtime_err(e),
    }
}

fn parse_stage(name: &str) -> PyResult<Stage> {
    Stage::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| {
            let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            value_err(format!(
                "unknown stage `{name}` (expected one of {})",
                names.join(", ")
            ))
        })
}

/// One experiment bound to a validated configuration.
///
/// Construct with a JSON string (empty string = reference defaults) and
/// query the model or run the identification pipeline.
#[pyclass]
struct Experiment {
    config: ExperimentConfig,
}

#[pymethods]
impl Experiment {
    #[new]
    #[pyo3(signature = (config_json = ""))]
    fn new(config_json: &str) -> PyResult<Self> {
        let config = cli::validate_config(config_json).map_err(cli_err)?;
        Ok(Self { config })
    }

    /// The fully resolved configuration as pretty JSON.
    fn config_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.config).map_err(runtime_err)
    }

    /// SHA-256 hash of the canonical configuration.
    fn config_hash(&self) -> String {
        cli::config_hash(&self.config)
    }

    /// First `count` undamped natural frequencies of the full beam model,
    /// in Hz ascending.
    fn modal_frequencies(&self, count: usize) -> PyResult<Vec<f64>> {
        let model = siva::beam::build_full_model(&self.config.beam).map_err(value_err)?;
        let modal = siva::beam::modal_analysis(&model).map_err(runtime_err)?;
        Ok(modal.frequencies_hz.into_iter().take(count).collect())
    }

    /// First `count` natural frequencies of the statically condensed
    /// (translation-only) model, in Hz ascending.
    fn reduced_frequencies(&self, count: usize) -> PyResult<Vec<f64>> {
        let model = siva::beam::build_full_model(&self.config.beam).map_err(value_err)?;
        let modal = siva::beam::modal_analysis(&model).map_err(runtime_err)?;
        let damping = siva::beam::build_damping(
            &model,
            &modal.frequencies_hz,
            &self.config.damping_ratios,
            &modal.mode_shapes,
        )
        .map_err(runtime_err)?;
        let masters = select_translational(&model);
        let reduced = guyan_reduce(&model, &damping, &masters).map_err(runtime_err)?;
        let eig = eig_sym_generalized(&reduced.k_r, &reduced.m_r).map_err(runtime_err)?;
        Ok(eig
            .values
            .iter()
            .take(count)
            .map(|&l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect())
    }

    /// Simulate the training impact record on the full model; returns
    /// (times_s, tip_displacement_m).
    fn simulate_training_tip(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let model = siva::beam::build_full_model(&self.config.beam).map_err(value_err)?;
        let modal = siva::beam::modal_analysis(&model).map_err(runtime_err)?;
        let damping = siva::beam::build_damping(
            &model,
            &modal.frequencies_hz,
            &self.config.damping_ratios,
            &modal.mode_shapes,
        )
        .map_err(runtime_err)?;
        let forcing = ForcingSpec {
            amplitude_n: self.config.forcing.training_amplitude_n,
            duration_s: self.config.forcing.pulse_duration_s,
            application_dof: model.tip_translation(),
            start_time_s: 0.0,
        };
        let record = simulate_full(
            &model,
            &damping,
            &self.config.attachment,
            &forcing,
            &self.config.grid,
            DatasetLabel::Training,
        )
        .map_err(runtime_err)?;
        let tip = record.tip_displacement();
        Ok((record.times_s, tip))
    }

    /// Run the pipeline up to and including `stage`, writing artifacts to
    /// `out_dir` (defaults to the configured output directory). Returns
    /// the report bundle as JSON.
    #[pyo3(signature = (stage = "report", out_dir = None, seed = None))]
    fn run(&self, stage: &str, out_dir: Option<&str>, seed: Option<u64>) -> PyResult<String> {
        let upto = parse_stage(stage)?;
        let mut config = self.config.clone();
        if let Some(dir) = out_dir {
            config.output_dir = dir.into();
        }
        if let Some(seed) = seed {
            config.training.seed = seed;
        }
        let bundle = cli::run_pipeline(&config, upto).map_err(cli_err)?;
        serde_json::to_string_pretty(&bundle).map_err(runtime_err)
    }
}

/// Resolved reference configuration as pretty JSON.
#[pyfunction]
fn default_config() -> PyResult<String> {
    serde_json::to_string_pretty(&ExperimentConfig::default()).map_err(runtime_err)
}

/// Single-sided FFT magnitude spectrum of a uniformly sampled signal;
/// returns (frequencies_hz, magnitudes).
#[pyfunction]
fn fft_spectrum(times_s: Vec<f64>, signal: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spectrum = siva::spectral::fft_spectrum(&times_s, &signal).map_err(value_err)?;
    Ok((spectrum.frequencies_hz, spectrum.magnitudes))
}

/// Morlet scalogram of a uniformly sampled signal over a log-spaced
/// frequency grid; returns (frequencies_hz, magnitude rows per frequency).
#[pyfunction]
#[pyo3(signature = (times_s, signal, lo_hz = 0.5, hi_hz = 500.0, count = 100))]
fn cwt_scalogram(
    times_s: Vec<f64>,
    signal: Vec<f64>,
    lo_hz: f64,
    hi_hz: f64,
    count: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(lo_hz > 0.0) || hi_hz <= lo_hz || count < 2 {
        return Err(value_err("need 0 < lo_hz < hi_hz and count >= 2"));
    }
    let grid = siva::spectral::log_spaced(lo_hz, hi_hz, count);
    let scalogram = siva::spectral::cwt_morlet(&times_s, &signal, &grid).map_err(value_err)?;
    Ok((scalogram.frequencies_hz, scalogram.magnitudes))
}

#[pymodule]
fn siva_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(fft_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cwt_scalogram, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_parse() {
        assert_eq!(parse_stage("report").unwrap(), Stage::Report);
        assert_eq!(parse_stage("build").unwrap(), Stage::Build);
        assert!(parse_stage("nonsense").is_err());
    }
}
