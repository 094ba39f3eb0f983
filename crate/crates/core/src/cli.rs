//! Batch orchestration: configuration parsing, staged pipeline execution
//! (build → simulate → reduce → identify → baseline → uq → report), and
//! bit-stable file I/O.
//!
//! Every artifact is either JSON (machine-readable, exact float round-trip
//! via shortest-decimal encoding, non-finite scores as tagged strings) or
//! CSV (17-significant-digit floats). Reruns with an identical resolved
//! configuration reuse completed stages: each stage records its artifact
//! list under a hash of the configuration and is skipped when that hash
//! matches and the files still exist.

use crate::beam::{build_damping, build_full_model, modal_analysis, BeamSpec, FullModel};
use crate::numerics::DenseMatrix;
use crate::reduction::{guyan_reduce, select_translational, ReducedModel};
use crate::simulate::{
    simulate_full, simulate_full_poly, simulate_reduced, AttachmentSpec, DatasetLabel, Datasets,
    ForcingSpec, GridSpec, TrajectorySet,
};
use crate::sindy::SindyReport;
use crate::siva::{
    approach_i, approach_ii, draw_parameter_samples, select_best, train, EpochRecord,
    ParameterEstimate, TrainingConfig, TrainingState,
};
use crate::spectral::{cwt_morlet, default_frequency_grid, fft_spectrum};
use crate::uq::{fit_normal, NormalFit};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Draws used for the sampling estimate and its uncertainty fit.
pub const APPROACH_I_SAMPLE_COUNT: usize = 1000;

/// Measured modal damping ratios of the reference specimen (modes 1–7;
/// higher modes reuse the last value).
pub const REFERENCE_DAMPING_RATIOS: [f64; 7] =
    [0.0069, 0.0052, 0.0014, 0.0017, 0.0044, 0.0038, 0.0042];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "stage `{stage}` failed (config {config_hash}; last artifact written: {last_artifact}): {message}"
    )]
    Stage {
        stage: Stage,
        config_hash: String,
        last_artifact: String,
        message: String,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for failures
    /// inside a pipeline stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}

/// Pipeline stages in execution order; `--stage X` stops after X.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Build,
    Simulate,
    Reduce,
    Identify,
    Baseline,
    Uq,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Build,
        Stage::Simulate,
        Stage::Reduce,
        Stage::Identify,
        Stage::Baseline,
        Stage::Uq,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Build => "build",
            Stage::Simulate => "simulate",
            Stage::Reduce => "reduce",
            Stage::Identify => "identify",
            Stage::Baseline => "baseline",
            Stage::Uq => "uq",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Impact excitation settings: one half-sine pulse at the tip per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub pulse_duration_s: f64,
    pub training_amplitude_n: f64,
    pub validation_amplitudes_n: Vec<f64>,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            pulse_duration_s: 0.00635,
            training_amplitude_n: 2000.0,
            validation_amplitudes_n: vec![1000.0, 3000.0],
        }
    }
}

/// Which full-model DOFs the reduction keeps as masters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterDofRule {
    /// Every free node's translation (one per node, root to tip).
    Translational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    pub master_dof_rule: MasterDofRule,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            master_dof_rule: MasterDofRule::Translational,
        }
    }
}

/// The complete experiment description. Every field has a reference
/// default, so an empty configuration file reproduces the reference run;
/// JSON keys carry their units and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub beam: BeamSpec,
    pub attachment: AttachmentSpec,
    pub forcing: ForcingConfig,
    pub grid: GridSpec,
    pub reduction: ReductionConfig,
    pub damping_ratios: Vec<f64>,
    pub training: TrainingConfig,
    pub sindy_threshold: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            beam: BeamSpec::default(),
            attachment: AttachmentSpec::default(),
            forcing: ForcingConfig::default(),
            grid: GridSpec::default(),
            reduction: ReductionConfig::default(),
            damping_ratios: REFERENCE_DAMPING_RATIOS.to_vec(),
            training: TrainingConfig::default(),
            sindy_threshold: 0.1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Semantic validation beyond schema shape; messages name the field.
    pub fn validate(&self) -> Result<(), String> {
        self.beam.validate().map_err(|e| e.to_string())?;
        let finite_positive = [
            (self.attachment.k_lin_n_per_m, "attachment.k_lin_n_per_m"),
            (self.forcing.pulse_duration_s, "forcing.pulse_duration_s"),
            (
                self.forcing.training_amplitude_n,
                "forcing.training_amplitude_n",
            ),
            (self.grid.duration_s, "grid.duration_s"),
            (self.grid.rate_hz, "grid.rate_hz"),
        ];
        for (value, field) in finite_positive {
            if !value.is_finite() || !(value > 0.0) {
                return Err(format!("{field} must be a positive finite number"));
            }
        }
        if !self.attachment.k_nl_n_per_m3.is_finite() {
            return Err("attachment.k_nl_n_per_m3 must be finite".into());
        }
        for &amp in &self.forcing.validation_amplitudes_n {
            if !amp.is_finite() || !(amp > 0.0) {
                return Err(
                    "forcing.validation_amplitudes_n entries must be positive finite numbers"
                        .into(),
                );
            }
            if amp == self.forcing.training_amplitude_n {
                return Err(format!(
                    "forcing.validation_amplitudes_n must not contain the training amplitude ({amp} N)"
                ));
            }
        }
        if self.grid.sample_count() < 2 {
            return Err("grid must contain at least two samples".into());
        }
        if self.damping_ratios.is_empty() {
            return Err("damping_ratios must not be empty".into());
        }
        for &r in &self.damping_ratios {
            if !r.is_finite() || !(r > 0.0) || r >= 1.0 {
                return Err("damping_ratios entries must lie strictly between 0 and 1".into());
            }
        }
        self.training.validate().map_err(|e| e.to_string())?;
        if self.training.batch_size > self.grid.sample_count() {
            return Err(format!(
                "training.batch_size ({}) exceeds the grid sample count ({})",
                self.training.batch_size,
                self.grid.sample_count()
            ));
        }
        if !self.sindy_threshold.is_finite() || self.sindy_threshold < 0.0 {
            return Err("sindy_threshold must be finite and >= 0".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err("output_dir must not be empty".into());
        }
        Ok(())
    }
}

/// Parse configuration file text: empty or whitespace-only input yields
/// the full reference defaults; otherwise strict JSON (unknown or
/// wrongly-suffixed keys are rejected), then semantic validation.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, CliError> {
    let trimmed = raw.trim();
    let config: ExperimentConfig = if trimmed.is_empty() {
        ExperimentConfig::default()
    } else {
        serde_json::from_str(trimmed).map_err(|e| CliError::Config(format!("config rejected: {e}")))?
    };
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

/// Hash of the canonical (serialized) configuration; keys every stage's
/// cache entry and stamps error messages and the final report.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    sha256_hex(canonical.as_bytes())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        use fmt::Write;
        write!(hex, "{b:02x}").expect("hex formatting");
    }
    hex
}

/// Per-coefficient normal fits for both extraction approaches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UqReport {
    pub approach_i: Vec<NormalFit>,
    pub approach_ii: Vec<NormalFit>,
}

/// Everything a run produced, with content hashes for the artifact files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config_hash: String,
    pub seed: u64,
    /// Order: sampling estimate, history average, best-by-resimulation.
    pub estimates: Vec<ParameterEstimate>,
    pub sindy: Option<SindyReport>,
    pub uq: Option<UqReport>,
    /// Largest |tip displacement| in the training record.
    pub q_star_m: Option<f64>,
    /// |k_i q*^i| / |k1 q* + k3 q*^3| for the sampling estimate, i = 1..5.
    pub monomial_force_shares: Option<Vec<f64>>,
    /// Relative L2 tip error of the best estimate resimulated on the full
    /// model, one entry per validation amplitude.
    #[serde(with = "crate::serde_util::nonfinite_vec")]
    pub validation_rel_l2: Vec<f64>,
    pub training_log_csv: Option<String>,
    pub figure_files: Vec<String>,
    /// Relative artifact path → SHA-256 of its bytes.
    pub manifest: BTreeMap<String, String>,
    pub stage_runtimes_s: BTreeMap<String, f64>,
}

/// One-screen human summary of a bundle.
pub fn summarize_bundle(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "config {}\nseed {}\n",
        &bundle.config_hash[..12.min(bundle.config_hash.len())],
        bundle.seed
    ));
    for est in &bundle.estimates {
        let k = est.values.as_array();
        out.push_str(&format!(
            "{:<20} k1 {:.4e}  k2 {:+.3e}  k3 {:.4e}  k4 {:+.3e}  k5 {:+.3e}  resim MSE {}\n",
            format!("{:?}", est.method),
            k[0],
            k[1],
            k[2],
            k[3],
            k[4],
            est.resim_mse_m2
                .map_or("n/a".to_string(), |m| format!("{m:.3e} m^2")),
        ));
    }
    if let Some(sindy) = &bundle.sindy {
        let k = sindy.attachment.as_array();
        out.push_str(&format!(
            "{:<20} k1 {:.4e}  k2 {:+.3e}  k3 {:.4e}  k4 {:+.3e}  k5 {:+.3e}  resim MSE {}\n",
            "SindyBaseline",
            k[0],
            k[1],
            k[2],
            k[3],
            k[4],
            sindy
                .resim_mse_m2
                .map_or("n/a".to_string(), |m| format!("{m:.3e} m^2")),
        ));
    }
    if !bundle.validation_rel_l2.is_empty() {
        let rels: Vec<String> = bundle
            .validation_rel_l2
            .iter()
            .map(|r| format!("{:.3e}", r))
            .collect();
        out.push_str(&format!("validation rel L2: {}\n", rels.join(", ")));
    }
    out.push_str(&format!("artifacts hashed: {}\n", bundle.manifest.len()));
    out
}

/// Execute the pipeline up to and including `upto`, reusing cached stages
/// whose configuration hash matches, and return the (possibly partial)
/// bundle. All artifacts land in `config.output_dir`.
pub fn run_pipeline(config: &ExperimentConfig, upto: Stage) -> Result<ReportBundle, CliError> {
    config.validate().map_err(CliError::Config)?;
    let mut ctx = PipelineCtx::new(config)?;
    for stage in Stage::ALL {
        if stage > upto {
            break;
        }
        ctx.run_stage(stage)?;
    }
    ctx.into_bundle(upto)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct StageStatus {
    config_hash: String,
    artifacts: Vec<String>,
}

struct PipelineCtx {
    config: ExperimentConfig,
    hash: String,
    out_dir: PathBuf,
    status: BTreeMap<String, StageStatus>,
    pending: Vec<String>,
    last_artifact: Option<String>,
    runtimes: BTreeMap<String, f64>,
    model: Option<FullModel>,
    damping: Option<DenseMatrix>,
    modal_frequencies: Vec<f64>,
    data: Option<Datasets>,
    reduced: Option<ReducedModel>,
    state: Option<TrainingState>,
    estimates: Vec<ParameterEstimate>,
    sindy: Option<SindyReport>,
    uq: Option<UqReport>,
    bundle: Option<ReportBundle>,
}

impl PipelineCtx {
    fn new(config: &ExperimentConfig) -> Result<Self, CliError> {
        let out_dir = config.output_dir.clone();
        fs::create_dir_all(&out_dir).map_err(|e| {
            CliError::Config(format!(
                "output_dir `{}` is not creatable: {e}",
                out_dir.display()
            ))
        })?;
        let status = fs::read_to_string(out_dir.join(STAGE_STATUS_FILE))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default();
        Ok(PipelineCtx {
            hash: config_hash(config),
            config: config.clone(),
            out_dir,
            status,
            pending: Vec::new(),
            last_artifact: None,
            runtimes: BTreeMap::new(),
            model: None,
            damping: None,
            modal_frequencies: Vec::new(),
            data: None,
            reduced: None,
            state: None,
            estimates: Vec::new(),
            sindy: None,
            uq: None,
            bundle: None,
        })
    }

    fn run_stage(&mut self, stage: Stage) -> Result<(), CliError> {
        let start = Instant::now();
        let result = match stage {
            Stage::Build => self.stage_build(),
            Stage::Simulate => self.stage_simulate(),
            Stage::Reduce => self.stage_reduce(),
            Stage::Identify => self.stage_identify(),
            Stage::Baseline => self.stage_baseline(),
            Stage::Uq => self.stage_uq(),
            Stage::Report => self.stage_report(),
        };
        match result {
            Ok(()) => {
                self.runtimes
                    .insert(stage.name().to_string(), start.elapsed().as_secs_f64());
                Ok(())
            }
            Err(message) => Err(CliError::Stage {
                stage,
                config_hash: self.hash.clone(),
                last_artifact: self
                    .last_artifact
                    .clone()
                    .unwrap_or_else(|| "none".to_string()),
                message,
            }),
        }
    }

    /// True when the stage completed earlier with this exact configuration
    /// and all of its artifacts still exist.
    fn cached(&self, stage: Stage) -> bool {
        self.status.get(stage.name()).is_some_and(|st| {
            st.config_hash == self.hash
                && st
                    .artifacts
                    .iter()
                    .all(|name| self.out_dir.join(name).is_file())
        })
    }

    /// Record a just-written artifact for the current stage.
    fn note(&mut self, name: &str) {
        self.last_artifact = Some(name.to_string());
        self.pending.push(name.to_string());
    }

    /// Close out a freshly computed stage: move its artifact list into the
    /// status map and persist the map.
    fn commit(&mut self, stage: Stage) -> Result<(), String> {
        let entry = StageStatus {
            config_hash: self.hash.clone(),
            artifacts: std::mem::take(&mut self.pending),
        };
        self.status.insert(stage.name().to_string(), entry);
        write_json_pretty(&self.out_dir, STAGE_STATUS_FILE, &self.status)
    }

    fn stage_build(&mut self) -> Result<(), String> {
        let model = build_full_model(&self.config.beam).map_err(|e| e.to_string())?;
        let modal = modal_analysis(&model).map_err(|e| e.to_string())?;
        let damping = build_damping(
            &model,
            &modal.frequencies_hz,
            &self.config.damping_ratios,
            &modal.mode_shapes,
        )
        .map_err(|e| e.to_string())?;
        if !self.cached(Stage::Build) {
            let config = self.config.clone();
            write_json_pretty(&self.out_dir, "config_resolved.json", &config)?;
            self.note("config_resolved.json");
            #[derive(Serialize)]
            struct ModalArtifact<'a> {
                frequencies_hz: &'a [f64],
                damping_ratios: &'a [f64],
            }
            let artifact = ModalArtifact {
                frequencies_hz: &modal.frequencies_hz,
                damping_ratios: &self.config.damping_ratios,
            };
            write_json_pretty(&self.out_dir, "modal.json", &artifact)?;
            self.note("modal.json");
            self.commit(Stage::Build)?;
        }
        self.modal_frequencies = modal.frequencies_hz;
        self.model = Some(model);
        self.damping = Some(damping);
        Ok(())
    }

    fn stage_simulate(&mut self) -> Result<(), String> {
        if self.cached(Stage::Simulate) {
            self.data = Some(read_json(&self.out_dir, "datasets.json")?);
            return Ok(());
        }
        let model = self.model.as_ref().ok_or("model missing (build stage)")?;
        let damping = self.damping.as_ref().ok_or("damping missing (build stage)")?;
        let attachment = self.config.attachment;
        let grid = self.config.grid;
        let pulse = self.config.forcing.pulse_duration_s;
        let tip_dof = model.tip_translation();
        let forcing_for = |amplitude_n: f64| ForcingSpec {
            amplitude_n,
            duration_s: pulse,
            application_dof: tip_dof,
            start_time_s: 0.0,
        };
        let amplitudes = self.config.forcing.validation_amplitudes_n.clone();
        let training_amplitude = self.config.forcing.training_amplitude_n;

        // The records are mutually independent pure computations; run them
        // on one thread each and join in declaration order.
        type SimResult = Result<TrajectorySet, String>;
        let (training, validation) = std::thread::scope(|scope| {
            let join = |h: std::thread::ScopedJoinHandle<
                '_,
                Result<TrajectorySet, crate::simulate::SimulateError>,
            >|
             -> SimResult {
                match h.join() {
                    Ok(result) => result.map_err(|e| e.to_string()),
                    Err(_) => Err("simulation thread panicked".to_string()),
                }
            };
            let training_handle = scope.spawn(|| {
                simulate_full(
                    model,
                    damping,
                    &attachment,
                    &forcing_for(training_amplitude),
                    &grid,
                    DatasetLabel::Training,
                )
            });
            let validation_handles: Vec<_> = amplitudes
                .iter()
                .map(|&amp| {
                    let forcing = forcing_for(amp);
                    scope.spawn(move || {
                        simulate_full(
                            model,
                            damping,
                            &attachment,
                            &forcing,
                            &grid,
                            DatasetLabel::Validation,
                        )
                    })
                })
                .collect();
            let training = join(training_handle);
            let validation: Vec<SimResult> =
                validation_handles.into_iter().map(join).collect();
            (training, validation)
        });
        let training = training.map_err(|e| format!("training record: {e}"))?;
        let mut records = Vec::with_capacity(validation.len());
        for (i, v) in validation.into_iter().enumerate() {
            records.push(v.map_err(|e| format!("validation record {}: {e}", i + 1))?);
        }
        let data = Datasets {
            training,
            validation: records,
        };

        write_json_compact(&self.out_dir, "datasets.json", &data)?;
        self.note("datasets.json");
        write_text(&self.out_dir, "tip_training.csv", &tip_csv(&data.training))?;
        self.note("tip_training.csv");
        for (i, record) in data.validation.iter().enumerate() {
            let name = format!("tip_validation_{}.csv", i + 1);
            write_text(&self.out_dir, &name, &tip_csv(record))?;
            self.note(&name);
        }
        self.commit(Stage::Simulate)?;
        self.data = Some(data);
        Ok(())
    }

    fn stage_reduce(&mut self) -> Result<(), String> {
        let model = self.model.as_ref().ok_or("model missing (build stage)")?;
        let damping = self.damping.as_ref().ok_or("damping missing (build stage)")?;
        let masters = match self.config.reduction.master_dof_rule {
            MasterDofRule::Translational => select_translational(model),
        };
        let reduced = guyan_reduce(model, damping, &masters).map_err(|e| e.to_string())?;
        if !self.cached(Stage::Reduce) {
            write_json_pretty(&self.out_dir, "reduced_model.json", &reduced)?;
            self.note("reduced_model.json");
            self.commit(Stage::Reduce)?;
        }
        self.reduced = Some(reduced);
        Ok(())
    }

    fn stage_identify(&mut self) -> Result<(), String> {
        if self.cached(Stage::Identify) {
            self.state = Some(read_json(&self.out_dir, "checkpoint.json")?);
            self.estimates = read_json(&self.out_dir, "estimates.json")?;
            return Ok(());
        }
        let reduced = self.reduced.as_ref().ok_or("reduced model missing (reduce stage)")?;
        let data = self.data.as_ref().ok_or("datasets missing (simulate stage)")?;
        let state = train(
            &self.config.training,
            reduced,
            &data.training,
            &data.validation,
        )
        .map_err(|e| e.to_string())?;
        let sampling = approach_i(&state, APPROACH_I_SAMPLE_COUNT).map_err(|e| e.to_string())?;
        let history = approach_ii(&state, state.config.approach_ii_start_epoch)
            .map_err(|e| e.to_string())?;
        let mut estimates = vec![sampling, history];
        let best = select_best(&mut estimates, reduced, &data.training).map_err(|e| e.to_string())?;
        estimates.push(best);

        write_text(
            &self.out_dir,
            "training_log.csv",
            &training_log_csv(&state.records),
        )?;
        self.note("training_log.csv");
        write_json_compact(&self.out_dir, "checkpoint.json", &state)?;
        self.note("checkpoint.json");
        write_json_pretty(&self.out_dir, "estimates.json", &estimates)?;
        self.note("estimates.json");
        self.commit(Stage::Identify)?;
        self.state = Some(state);
        self.estimates = estimates;
        Ok(())
    }

    fn stage_baseline(&mut self) -> Result<(), String> {
        if self.cached(Stage::Baseline) {
            self.sindy = Some(read_json(&self.out_dir, "sindy.json")?);
            return Ok(());
        }
        let reduced = self.reduced.as_ref().ok_or("reduced model missing (reduce stage)")?;
        let data = self.data.as_ref().ok_or("datasets missing (simulate stage)")?;
        let report = crate::sindy::identify(reduced, &data.training, self.config.sindy_threshold)
            .map_err(|e| e.to_string())?;
        write_json_pretty(&self.out_dir, "sindy.json", &report)?;
        self.note("sindy.json");
        self.commit(Stage::Baseline)?;
        self.sindy = Some(report);
        Ok(())
    }

    fn stage_uq(&mut self) -> Result<(), String> {
        if self.cached(Stage::Uq) {
            self.uq = Some(read_json(&self.out_dir, "uq.json")?);
            return Ok(());
        }
        let state = self.state.as_ref().ok_or("training state missing (identify stage)")?;
        let samples =
            draw_parameter_samples(state, APPROACH_I_SAMPLE_COUNT).map_err(|e| e.to_string())?;
        let window: Vec<_> = state
            .records
            .iter()
            .filter(|r| r.epoch > state.config.approach_ii_start_epoch)
            .map(|r| r.lambda)
            .collect();
        let labels = ["k1", "k2", "k3", "k4", "k5"];
        let fit_set = |vectors: &[crate::siva::ParameterVector]| -> Result<Vec<NormalFit>, String> {
            (0..5)
                .map(|i| {
                    let values: Vec<f64> = vectors.iter().map(|v| v.as_array()[i]).collect();
                    fit_normal(labels[i], &values).map_err(|e| format!("{} fit: {e}", labels[i]))
                })
                .collect()
        };
        let report = UqReport {
            approach_i: fit_set(&samples)?,
            approach_ii: fit_set(&window)?,
        };
        write_json_pretty(&self.out_dir, "uq.json", &report)?;
        self.note("uq.json");
        self.commit(Stage::Uq)?;
        self.uq = Some(report);
        Ok(())
    }

    fn stage_report(&mut self) -> Result<(), String> {
        if self.cached(Stage::Report) {
            self.bundle = Some(read_json(&self.out_dir, "report.json")?);
            return Ok(());
        }
        // Detach the heavy state from `self` so artifact bookkeeping can
        // borrow `self` mutably in between; restored at the end.
        let model = self.model.take().ok_or("model missing (build stage)")?;
        let damping = self.damping.take().ok_or("damping missing (build stage)")?;
        let data = self.data.take().ok_or("datasets missing (simulate stage)")?;
        let reduced = self.reduced.take().ok_or("reduced model missing (reduce stage)")?;
        if self.estimates.len() < 3 {
            return Err("estimates missing (identify stage)".to_string());
        }
        let sampling = self.estimates[0].clone();
        let history = self.estimates[1].clone();
        let best = self.estimates[2].clone();
        let grid = self.config.grid;
        let times = &data.training.times_s;
        let exact_tip = data.training.tip_displacement();

        // Reduced-model resimulations of the training record for both
        // extraction approaches, plus their spectra.
        let resim_of = |est: &ParameterEstimate| -> Result<TrajectorySet, String> {
            simulate_reduced(
                &reduced,
                &est.values.as_array(),
                &data.training.forcing,
                &grid,
            )
            .map_err(|e| format!("resimulating {:?}: {e}", est.method))
        };
        let resim_sampling = resim_of(&sampling)?;
        let resim_history = resim_of(&history)?;
        let best_tip = if best.method == self.estimates[0].method {
            resim_sampling.tip_displacement()
        } else {
            resim_history.tip_displacement()
        };

        let mut figure_files = Vec::new();
        let resim_csv = columns_csv(
            "time_s,exact_m,approach_i_m,approach_ii_m",
            times,
            &[
                &exact_tip,
                &resim_sampling.tip_displacement(),
                &resim_history.tip_displacement(),
            ],
        );
        write_text(&self.out_dir, "resim_tip_training.csv", &resim_csv)?;
        self.note("resim_tip_training.csv");
        figure_files.push("resim_tip_training.csv".to_string());

        let exact_spectrum = fft_spectrum(times, &exact_tip).map_err(|e| e.to_string())?;
        write_text(
            &self.out_dir,
            "spectrum_training_exact.csv",
            &spectrum_csv(&exact_spectrum.frequencies_hz, &exact_spectrum.magnitudes),
        )?;
        self.note("spectrum_training_exact.csv");
        figure_files.push("spectrum_training_exact.csv".to_string());

        let best_spectrum = fft_spectrum(times, &best_tip).map_err(|e| e.to_string())?;
        write_text(
            &self.out_dir,
            "spectrum_training_identified.csv",
            &spectrum_csv(&best_spectrum.frequencies_hz, &best_spectrum.magnitudes),
        )?;
        self.note("spectrum_training_identified.csv");
        figure_files.push("spectrum_training_identified.csv".to_string());

        // The wavelet grid must stay below the record's Nyquist frequency.
        let nyquist_hz = grid.rate_hz / 2.0;
        let cwt_grid: Vec<f64> = default_frequency_grid()
            .into_iter()
            .filter(|&f| f < nyquist_hz)
            .collect();
        if cwt_grid.is_empty() {
            return Err(format!(
                "no wavelet frequencies available below Nyquist ({nyquist_hz} Hz)"
            ));
        }
        let scalogram = cwt_morlet(times, &exact_tip, &cwt_grid).map_err(|e| e.to_string())?;
        write_text(
            &self.out_dir,
            "scalogram_training.csv",
            &scalogram_csv(&scalogram.times_s, &scalogram.frequencies_hz, &scalogram.magnitudes),
        )?;
        self.note("scalogram_training.csv");
        figure_files.push("scalogram_training.csv".to_string());

        // Generalization check: the best estimate replayed on the FULL
        // model at each held-out amplitude.
        let mut validation_rel_l2 = Vec::new();
        for (i, record) in data.validation.iter().enumerate() {
            let resim = simulate_full_poly(
                &model,
                &damping,
                &best.values.as_array(),
                &record.forcing,
                &grid,
            )
            .map_err(|e| format!("validation resimulation {}: {e}", i + 1))?;
            let exact = record.tip_displacement();
            let resim_tip = resim.tip_displacement();
            validation_rel_l2.push(relative_l2(&exact, &resim_tip));
            let name = format!("resim_tip_validation_{}.csv", i + 1);
            let csv = columns_csv(
                "time_s,exact_m,identified_m",
                &record.times_s,
                &[&exact, &resim_tip],
            );
            write_text(&self.out_dir, &name, &csv)?;
            self.note(&name);
            figure_files.push(name);
        }

        // Monomial force shares of the sampling estimate at the largest
        // training excursion.
        let q_star = exact_tip.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        let k = sampling.values.as_array();
        let linear_cubic = (k[0] * q_star + k[2] * q_star.powi(3)).abs();
        let shares: Vec<f64> = (0..5)
            .map(|i| (k[i] * q_star.powi(i as i32 + 1)).abs() / linear_cubic)
            .collect();

        // Hash every data artifact produced (or reused) by this
        // configuration; the report and manifest themselves stay out.
        let mut manifest = BTreeMap::new();
        let mut to_hash: Vec<String> = self
            .status
            .values()
            .filter(|st| st.config_hash == self.hash)
            .flat_map(|st| st.artifacts.iter().cloned())
            .chain(self.pending.iter().cloned())
            .collect();
        to_hash.sort();
        to_hash.dedup();
        for name in to_hash {
            let bytes = fs::read(self.out_dir.join(&name))
                .map_err(|e| format!("hashing {name}: {e}"))?;
            manifest.insert(name, sha256_hex(&bytes));
        }

        let mut runtimes = self.runtimes.clone();
        runtimes.insert("report".to_string(), 0.0);
        let bundle = ReportBundle {
            config_hash: self.hash.clone(),
            seed: self.config.training.seed,
            estimates: self.estimates.clone(),
            sindy: self.sindy.clone(),
            uq: self.uq.clone(),
            q_star_m: Some(q_star),
            monomial_force_shares: Some(shares),
            validation_rel_l2,
            training_log_csv: Some("training_log.csv".to_string()),
            figure_files,
            manifest,
            stage_runtimes_s: runtimes,
        };
        write_json_pretty(&self.out_dir, "report.json", &bundle)?;
        self.note("report.json");
        write_json_pretty(&self.out_dir, "manifest.json", &bundle.manifest)?;
        self.note("manifest.json");
        self.commit(Stage::Report)?;
        self.bundle = Some(bundle);
        self.model = Some(model);
        self.damping = Some(damping);
        self.data = Some(data);
        self.reduced = Some(reduced);
        Ok(())
    }

    /// Final bundle: the report stage's if it ran, otherwise a partial one
    /// covering whatever stages completed.
    fn into_bundle(mut self, upto: Stage) -> Result<ReportBundle, CliError> {
        if let Some(mut bundle) = self.bundle.take() {
            bundle.stage_runtimes_s = self.runtimes.clone();
            return Ok(bundle);
        }
        let mut manifest = BTreeMap::new();
        for st in self.status.values().filter(|st| st.config_hash == self.hash) {
            for name in &st.artifacts {
                let bytes = fs::read(self.out_dir.join(name)).map_err(|e| CliError::Stage {
                    stage: upto,
                    config_hash: self.hash.clone(),
                    last_artifact: name.clone(),
                    message: format!("hashing {name}: {e}"),
                })?;
                manifest.insert(name.clone(), sha256_hex(&bytes));
            }
        }
        let training_log = manifest
            .contains_key("training_log.csv")
            .then(|| "training_log.csv".to_string());
        Ok(ReportBundle {
            config_hash: self.hash,
            seed: self.config.training.seed,
            estimates: self.estimates,
            sindy: self.sindy,
            uq: self.uq,
            q_star_m: None,
            monomial_force_shares: None,
            validation_rel_l2: Vec::new(),
            training_log_csv: training_log,
            figure_files: Vec::new(),
            manifest,
            stage_runtimes_s: self.runtimes,
        })
    }
}

const STAGE_STATUS_FILE: &str = "stage_status.json";

/// Relative L2 error ‖candidate − reference‖ / ‖reference‖ over the
/// common prefix.
pub fn relative_l2(reference: &[f64], candidate: &[f64]) -> f64 {
    let m = reference.len().min(candidate.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let d = candidate[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// 17-significant-digit float formatting: the decimal form reparses to
/// the identical f64, making CSV artifacts byte-checkable.
pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    fs::write(dir.join(name), text).map_err(|e| format!("writing {name}: {e}"))
}

fn write_json_pretty<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), String> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| format!("serializing {name}: {e}"))?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Compact encoding for bulk machine artifacts (datasets, checkpoints).
fn write_json_compact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string(value).map_err(|e| format!("serializing {name}: {e}"))?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, String> {
    let text =
        fs::read_to_string(dir.join(name)).map_err(|e| format!("reading cached {name}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("parsing cached {name}: {e}"))
}

fn tip_csv(record: &TrajectorySet) -> String {
    let tip = record.tip_displacement();
    columns_csv("time_s,tip_m", &record.times_s, &[&tip])
}

/// CSV with a time column followed by aligned value columns.
fn columns_csv(header: &str, times: &[f64], columns: &[&[f64]]) -> String {
    let mut out = String::with_capacity((columns.len() + 1) * 26 * times.len() + header.len() + 2);
    out.push_str(header);
    out.push('\n');
    for (i, t) in times.iter().enumerate() {
        out.push_str(&fmt_f(*t));
        for col in columns {
            out.push(',');
            out.push_str(&fmt_f(col[i]));
        }
        out.push('\n');
    }
    out
}

fn spectrum_csv(frequencies_hz: &[f64], magnitudes: &[f64]) -> String {
    columns_csv("freq_hz,magnitude", frequencies_hz, &[magnitudes])
}

/// Scalogram matrix as CSV: one row per frequency, one column per sampled
/// instant (time axis decimated to at most ~1000 columns).
fn scalogram_csv(times_s: &[f64], frequencies_hz: &[f64], magnitudes: &[Vec<f64>]) -> String {
    let stride = times_s.len().div_ceil(1001).max(1);
    let sampled: Vec<usize> = (0..times_s.len()).step_by(stride).collect();
    let mut out = String::with_capacity((sampled.len() + 1) * 26 * (frequencies_hz.len() + 1));
    out.push_str("freq_hz");
    for &i in &sampled {
        out.push(',');
        out.push_str(&fmt_f(times_s[i]));
    }
    out.push('\n');
    for (f, row) in frequencies_hz.iter().zip(magnitudes) {
        out.push_str(&fmt_f(*f));
        for &i in &sampled {
            out.push(',');
            out.push_str(&fmt_f(row[i]));
        }
        out.push('\n');
    }
    out
}

fn training_log_csv(records: &[EpochRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 240 + 48);
    out.push_str("epoch,L_D,L_adv,L_MSE,L_P,k1,k2,k3,k4,k5\n");
    for r in records {
        out.push_str(&r.epoch.to_string());
        let k = r.lambda.as_array();
        for v in [r.l_d, r.l_adv, r.l_mse, r.l_p, k[0], k[1], k[2], k[3], k[4]] {
            out.push(',');
            out.push_str(&fmt_f(v));
        }
        out.push('\n');
    }
    out
}

/// Pretty-print an emitted artifact: JSON re-indented, CSV summarized
/// (shape, header, first rows).
pub fn describe_artifact(path: &Path) -> Result<String, CliError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    match ext.as_str() {
        "json" => {
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
            serde_json::to_string_pretty(&value)
                .map_err(|e| CliError::Config(format!("formatting {}: {e}", path.display())))
        }
        "csv" => {
            let mut lines = text.lines();
            let header = lines.next().unwrap_or("");
            let rows: Vec<&str> = lines.collect();
            let mut out = format!(
                "{}: {} data rows x {} columns\n",
                path.display(),
                rows.len(),
                header.split(',').count()
            );
            let clip = |line: &str| -> String {
                if line.len() > 120 {
                    format!("{}…", &line[..119])
                } else {
                    line.to_string()
                }
            };
            out.push_str(&clip(header));
            out.push('\n');
            for row in rows.iter().take(8) {
                out.push_str(&clip(row));
                out.push('\n');
            }
            if rows.len() > 8 {
                out.push_str(&format!("… ({} more rows)\n", rows.len() - 8));
            }
            Ok(out)
        }
        other => Err(CliError::Config(format!(
            "unsupported artifact type `.{other}` (expected .json or .csv)"
        ))),
    }
}
