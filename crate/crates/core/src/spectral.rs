//! Post-processing: one-sided Fourier amplitude spectra, analytic Morlet
//! wavelet scalograms normalized to unit maximum, and the tip-displacement
//! error metric.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("need at least two samples")]
    TooShort,
    #[error("sampling grid is not uniform (max deviation {0:.3e} of the step)")]
    NonUniformGrid(f64),
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency {0} Hz outside (0, Nyquist)")]
    FrequencyOutOfRange(f64),
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// One-sided amplitude spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub sample_rate_hz: f64,
}

/// Wavelet magnitude map, rows = frequencies, columns = times, scaled so
/// the global maximum is exactly 1 (all zero for a zero signal).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scalogram {
    pub times_s: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    /// magnitudes[f][t]
    pub magnitudes: Vec<Vec<f64>>,
}

/// Morlet center frequency (rad) — the standard analytic-wavelet choice.
pub const MORLET_OMEGA0: f64 = 6.0;

/// Default scalogram frequency grid: log-spaced points for figures.
pub fn default_frequency_grid() -> Vec<f64> {
    log_spaced(0.5, 500.0, 200)
}

pub fn log_spaced(lo_hz: f64, hi_hz: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo_hz > 0.0 && hi_hz > lo_hz);
    let ratio = (hi_hz / lo_hz).ln() / (count - 1) as f64;
    (0..count).map(|i| lo_hz * (ratio * i as f64).exp()).collect()
}

fn uniform_rate(times_s: &[f64]) -> Result<f64, SpectralError> {
    if times_s.len() < 2 {
        return Err(SpectralError::TooShort);
    }
    let dt = times_s[1] - times_s[0];
    if !(dt > 0.0) {
        return Err(SpectralError::NonUniformGrid(f64::INFINITY));
    }
    let mut worst = 0.0f64;
    for i in 1..times_s.len() {
        let step = times_s[i] - times_s[i - 1];
        worst = worst.max(((step - dt) / dt).abs());
    }
    if worst > 1e-6 {
        return Err(SpectralError::NonUniformGrid(worst));
    }
    Ok(1.0 / dt)
}

/// One-sided amplitude spectrum of a uniformly sampled signal: interior
/// bins carry 2/N · |X_k| so a unit sine reads 1; DC and Nyquist carry 1/N.
pub fn fft_spectrum(times_s: &[f64], signal: &[f64]) -> Result<Spectrum, SpectralError> {
    if signal.len() != times_s.len() {
        return Err(SpectralError::LengthMismatch(times_s.len(), signal.len()));
    }
    let fs = uniform_rate(times_s)?;
    let n = signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mut frequencies_hz = Vec::with_capacity(half + 1);
    let mut magnitudes = Vec::with_capacity(half + 1);
    for (k, item) in buf.iter().enumerate().take(half + 1) {
        let is_edge = k == 0 || (n % 2 == 0 && k == half);
        let scale = if is_edge { 1.0 } else { 2.0 } / n as f64;
        frequencies_hz.push(k as f64 * fs / n as f64);
        magnitudes.push(item.norm() * scale);
    }
    Ok(Spectrum {
        frequencies_hz,
        magnitudes,
        sample_rate_hz: fs,
    })
}

/// Analytic Morlet scalogram by FFT-based convolution per scale, with the
/// scale–frequency relation f = (ω₀ + √(2+ω₀²))/(4πs) and L²-normalized
/// wavelets, then a global rescale to unit maximum.
pub fn cwt_morlet(
    times_s: &[f64],
    signal: &[f64],
    freq_grid_hz: &[f64],
) -> Result<Scalogram, SpectralError> {
    if signal.len() != times_s.len() {
        return Err(SpectralError::LengthMismatch(times_s.len(), signal.len()));
    }
    let fs = uniform_rate(times_s)?;
    if freq_grid_hz.is_empty() {
        return Err(SpectralError::EmptyGrid);
    }
    for &f in freq_grid_hz {
        if !(f > 0.0) || f >= fs / 2.0 {
            return Err(SpectralError::FrequencyOutOfRange(f));
        }
    }
    let n = signal.len();
    let dt = 1.0 / fs;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex<f64>> =
        signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut spectrum);

    // Angular frequency of bin k (negative for the upper half).
    let omega = |k: usize| -> f64 {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * std::f64::consts::PI * kk / (n as f64 * dt)
    };
    let fourier_factor =
        (MORLET_OMEGA0 + (2.0 + MORLET_OMEGA0 * MORLET_OMEGA0).sqrt()) / (4.0 * std::f64::consts::PI);
    let norm_root = std::f64::consts::PI.powf(-0.25);

    let mut magnitudes = Vec::with_capacity(freq_grid_hz.len());
    let mut global_max = 0.0f64;
    for &f in freq_grid_hz {
        let s = fourier_factor / f;
        let amp = norm_root * (2.0 * std::f64::consts::PI * s / dt).sqrt();
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let w = omega(k);
                if w > 0.0 {
                    let arg = s * w - MORLET_OMEGA0;
                    spectrum[k] * (amp * (-0.5 * arg * arg).exp())
                } else {
                    Complex::new(0.0, 0.0)
                }
            })
            .collect();
        inv.process(&mut buf);
        let row: Vec<f64> = buf.iter().map(|c| c.norm() / n as f64).collect();
        for &v in &row {
            global_max = global_max.max(v);
        }
        magnitudes.push(row);
    }
    if global_max > 0.0 {
        for row in &mut magnitudes {
            for v in row {
                *v /= global_max;
            }
        }
    }
    Ok(Scalogram {
        times_s: times_s.to_vec(),
        frequencies_hz: freq_grid_hz.to_vec(),
        magnitudes,
    })
}

/// Mean squared difference between two equal-length displacement series.
pub fn tip_mse(exact: &[f64], simulated: &[f64]) -> Result<f64, SpectralError> {
    if exact.len() != simulated.len() {
        return Err(SpectralError::LengthMismatch(exact.len(), simulated.len()));
    }
    if exact.is_empty() {
        return Err(SpectralError::TooShort);
    }
    let n = exact.len() as f64;
    Ok(exact
        .iter()
        .zip(simulated)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Per-time argmax frequency of a scalogram — the ridge used in the
/// single-tone and chirp diagnostics.
pub fn ridge(scalogram: &Scalogram) -> Vec<f64> {
    let nt = scalogram.times_s.len();
    let mut out = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut best = 0usize;
        let mut best_v = f64::MIN;
        for (fi, row) in scalogram.magnitudes.iter().enumerate() {
            if row[t] > best_v {
                best_v = row[t];
                best = fi;
            }
        }
        out.push(scalogram.frequencies_hz[best]);
    }
    out
}
