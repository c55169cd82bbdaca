//! Dominant-frequency estimation for uniformly sampled complex signals:
//! Hann window, zero padding, FFT, and quadratic interpolation of the peak.

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quantum_core::C64;

/// A located spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Angular frequency `ω` of the `e^{+iωt}` component (rad/μs).
    pub omega: f64,
    /// Peak magnitude (arbitrary units).
    pub magnitude: f64,
    /// Bin spacing after zero padding (rad/μs).
    pub bin_width: f64,
    /// Natural resolution `2π/span` (rad/μs).
    pub resolution: f64,
}

/// Finds the strongest `e^{+iωt}` component with `ω ∈ [lo, hi]`.
///
/// `dt` is the sample spacing. Peaks whose magnitude is within 10% of the
/// maximum and lie further than one resolution element away make the result
/// ambiguous.
pub fn dominant_frequency(signal: &[C64], dt: f64, lo: f64, hi: f64, pad_factor: usize) -> Result<Peak> {
    let n = signal.len();
    if n < 16 {
        return Err(Error::AmbiguousSpectrum(format!("signal too short ({n} samples)")));
    }
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect();
    // Removing the window-weighted mean leaves no zero-frequency component.
    let mean = signal.iter().zip(&window).map(|(s, w)| s * w).sum::<C64>() / window.iter().sum::<f64>();
    let len = (n * pad_factor.max(1)).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for ((b, s), w) in buf.iter_mut().zip(signal).zip(&window) {
        *b = (s - mean) * w;
    }
    // Forward FFT uses e^{−iωt}, so a component e^{+iωt} appears at +ω.
    FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut buf);
    let bin_width = 2.0 * std::f64::consts::PI / (len as f64 * dt);
    let resolution = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let omega_of = |k: usize| {
        let k = k as i64;
        let signed = if k > len as i64 / 2 { k - len as i64 } else { k };
        signed as f64 * bin_width
    };
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let mut maxima: Vec<(usize, f64)> = (0..len)
        .filter(|&k| {
            let w = omega_of(k);
            w >= lo && w <= hi
        })
        .filter(|&k| {
            let prev = mag[(k + len - 1) % len];
            let next = mag[(k + 1) % len];
            mag[k] >= prev && mag[k] > next
        })
        .map(|k| (k, mag[k]))
        .collect();
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
    let Some(&(k0, m0)) = maxima.first() else {
        return Err(Error::AmbiguousSpectrum(format!("no spectral peak in [{lo}, {hi}] rad/μs")));
    };
    if m0 <= 1e-12 * n as f64 {
        return Err(Error::AmbiguousSpectrum(format!("no oscillation in [{lo}, {hi}] rad/μs")));
    }
    let w0 = omega_of(k0);
    for &(k, m) in maxima.iter().skip(1) {
        if m >= 0.9 * m0 && (omega_of(k) - w0).abs() > resolution {
            return Err(Error::AmbiguousSpectrum(format!(
                "competing peaks at {w0:.6} and {:.6} rad/μs",
                omega_of(k)
            )));
        }
    }
    // Quadratic interpolation on log magnitude (exact for Gaussian lobes,
    // near-exact for a zero-padded Hann lobe).
    let (a, b, c) = (mag[(k0 + len - 1) % len].ln(), m0.ln(), mag[(k0 + 1) % len].ln());
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(Peak {
        omega: w0 + shift * bin_width,
        magnitude: m0,
        bin_width,
        resolution,
    })
}
