//! Uncertainty quantification: fit a normal distribution to collected
//! parameter samples and evaluate its density over a ±6σ grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UqError {
    #[error("need at least two samples to fit a distribution, got {0}")]
    TooFewSamples(usize),
    #[error("samples must be finite")]
    NonFiniteSample,
}

pub const PDF_GRID_POINTS: usize = 601;

/// Density evaluated on a uniform grid spanning mean ± 6 standard deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdfGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalFit {
    pub label: String,
    pub mean: f64,
    /// Unbiased (n−1) sample standard deviation.
    pub std_dev: f64,
    pub sample_count: usize,
    /// Central 95% interval, mean ± 1.96σ.
    pub ci95: (f64, f64),
    /// None when the samples are identical (degenerate point mass).
    pub pdf: Option<PdfGrid>,
    pub degenerate: bool,
}

pub fn fit_normal(label: &str, samples: &[f64]) -> Result<NormalFit, UqError> {
    if samples.len() < 2 {
        return Err(UqError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(UqError::NonFiniteSample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let std_dev = (ss / (n - 1.0)).sqrt();
    let ci95 = (mean - 1.96 * std_dev, mean + 1.96 * std_dev);
    let degenerate = std_dev == 0.0;
    let pdf = if degenerate {
        None
    } else {
        let lo = mean - 6.0 * std_dev;
        let hi = mean + 6.0 * std_dev;
        let step = (hi - lo) / (PDF_GRID_POINTS - 1) as f64;
        let norm = 1.0 / (std_dev * (2.0 * std::f64::consts::PI).sqrt());
        let mut x = Vec::with_capacity(PDF_GRID_POINTS);
        let mut density = Vec::with_capacity(PDF_GRID_POINTS);
        for i in 0..PDF_GRID_POINTS {
            let xi = lo + i as f64 * step;
            let zi = (xi - mean) / std_dev;
            x.push(xi);
            density.push(norm * (-0.5 * zi * zi).exp());
        }
        Some(PdfGrid { x, density })
    };
    Ok(NormalFit {
        label: label.to_string(),
        mean,
        std_dev,
        sample_count: samples.len(),
        ci95,
        pdf,
        degenerate,
    })
}
