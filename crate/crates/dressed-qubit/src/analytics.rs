//! Closed-form dephasing envelopes and coherence-time extraction.
//!
//! For a qubit whose gap `Ω` is perturbed at second order by Ornstein-Uhlenbeck
//! noise `B(t)`, the accumulated phase is `φ = (1/Ω)∫B²dt`. Since `B²` follows
//! a square-root (CIR) process, `⟨e^{iφ}⟩ = F·G` in closed form:
//!
//! ```text
//! F = e^{γt/2} / √(cosh(ξt/2) + (2γ/ξ) sinh(ξt/2))
//! G = exp(2ig² / (Ω(2γ + ξ coth(ξt/2))))
//! ξ = √(4γ² − 16iγg²/Ω)
//! ```
//!
//! with `γ = 1/τ` and `g² = cτ/2`. Rates `γ_m`, `γ_d` are given in Hz and
//! converted to μs⁻¹ internally.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::noise::OUParams;

/// `(1 + 1/e)/2`, the population threshold defining T2.
pub const T2_THRESHOLD: f64 = 0.5 * (1.0 + 1.0 / std::f64::consts::E);

/// Hz → μs⁻¹.
pub const HZ_TO_PER_US: f64 = 1e-6;

/// Parameters of the dephasing envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    /// `γ = 1/τ` (μs⁻¹).
    pub gamma: f64,
    /// Stationary noise variance `g² = cτ/2` (rad²/μs²).
    pub g_squared: f64,
    /// Gap protecting the qubit (rad/μs): `Ω` for a driven two-level system,
    /// `E_BD` for the spin-1 dressed qubit.
    pub omega_gap: f64,
    /// First-order mixing dephasing rate (Hz).
    pub gamma_m_hz: f64,
    /// Drive-fluctuation dephasing rate (Hz).
    pub gamma_d_hz: f64,
}

impl EnvelopeParams {
    /// Envelope for magnetic noise `noise` acting on a gap `omega_gap`.
    pub fn from_noise(noise: &OUParams, omega_gap: f64) -> Self {
        Self {
            gamma: noise.gamma(),
            g_squared: noise.stationary_variance(),
            omega_gap,
            gamma_m_hz: 0.0,
            gamma_d_hz: 0.0,
        }
    }

    pub fn with_rates(mut self, gamma_m_hz: f64, gamma_d_hz: f64) -> Self {
        self.gamma_m_hz = gamma_m_hz;
        self.gamma_d_hz = gamma_d_hz;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega_gap.is_finite() && self.omega_gap != 0.0) {
            return Err(invalid("omega_gap", "gap must be finite and nonzero"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.g_squared.is_finite() && self.g_squared >= 0.0) {
            return Err(invalid("gamma/g_squared", "γ must be positive and g² non-negative"));
        }
        if !(self.gamma_m_hz >= 0.0 && self.gamma_d_hz >= 0.0) {
            return Err(invalid("gamma_m/gamma_d", "rates must be non-negative"));
        }
        Ok(())
    }
}

/// `ξ`, `F(t)` and `G(t)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnvelope {
    pub xi: Complex64,
    pub f: Complex64,
    pub g: Complex64,
}

impl ComplexEnvelope {
    /// `|F·G|`.
    pub fn magnitude(&self) -> f64 {
        (self.f * self.g).norm()
    }
}

/// `ξ = √(4γ² − 16iγg²/Ω)` on the principal branch.
pub fn xi(params: &EnvelopeParams) -> Result<Complex64> {
    params.validate()?;
    let g = params.gamma;
    Ok(Complex64::new(4.0 * g * g, -16.0 * g * params.g_squared / params.omega_gap).sqrt())
}

/// Wraps an imaginary part into `(−π, π]` so `exp(w)` keeps its value while
/// `w` becomes the principal logarithm.
fn principal_log(w: Complex64) -> Complex64 {
    use std::f64::consts::PI;
    let mut im = w.im % (2.0 * PI);
    if im > PI {
        im -= 2.0 * PI;
    } else if im <= -PI {
        im += 2.0 * PI;
    }
    Complex64::new(w.re, im)
}

/// `F(t)` and `G(t)`, evaluated in the log domain so that `t` up to 10⁴ μs
/// cannot overflow.
pub fn fg_envelope(t: f64, params: &EnvelopeParams) -> Result<ComplexEnvelope> {
    let xi = xi(params)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(ComplexEnvelope { xi, f: 1.0.into(), g: 1.0.into() });
    }
    let one = Complex64::from(1.0);
    let z = xi * (0.5 * t);
    let a = Complex64::from(2.0 * params.gamma) / xi;
    let e2 = (-2.0 * z).exp();
    // cosh z + a sinh z = e^z [(1+a)/2 + (1−a)/2 e^{−2z}]
    let log_d = principal_log(z + ((one + a) * 0.5 + (one - a) * 0.5 * e2).ln());
    let f = (Complex64::from(0.5 * params.gamma * t) - 0.5 * log_d).exp();
    let coth = (one + e2) / (one - e2);
    let g_exp = Complex64::new(0.0, 2.0 * params.g_squared) / (params.omega_gap * (2.0 * params.gamma + xi * coth));
    Ok(ComplexEnvelope { xi, f, g: g_exp.exp() })
}

/// `P_Ω(t) = (1 + |F·G|)/2`.
pub fn p_omega(t: f64, params: &EnvelopeParams) -> Result<f64> {
    Ok(0.5 * (1.0 + fg_envelope(t, params)?.magnitude()))
}

/// `P(t) = (1 + |F·G|·e^{−γ_m t}·e^{−(γ_d t)²})/2`.
pub fn p_total(t: f64, params: &EnvelopeParams) -> Result<f64> {
    let fg = fg_envelope(t, params)?.magnitude();
    let gm = params.gamma_m_hz * HZ_TO_PER_US;
    let gd = params.gamma_d_hz * HZ_TO_PER_US;
    Ok(0.5 * (1.0 + fg * (-gm * t).exp() * (-(gd * t).powi(2)).exp()))
}

/// Undriven free-induction decay `(1 + e^{−g²t²/2})/2` with `g² = 2/T2*²`.
pub fn pure_dephasing(t: f64, t2_star: f64) -> f64 {
    let g2 = 2.0 / (t2_star * t2_star);
    0.5 * (1.0 + (-0.5 * g2 * t * t).exp())
}

/// Result of a threshold-crossing search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T2Estimate {
    /// First downward crossing of the threshold (μs).
    Crossing(f64),
    /// No crossing before the end of the curve: `T2 > value`.
    LowerBound(f64),
}

impl T2Estimate {
    pub fn value(&self) -> f64 {
        match *self {
            T2Estimate::Crossing(v) | T2Estimate::LowerBound(v) => v,
        }
    }

    pub fn crossing(&self) -> Option<f64> {
        match *self {
            T2Estimate::Crossing(v) => Some(v),
            T2Estimate::LowerBound(_) => None,
        }
    }

    pub fn is_lower_bound(&self) -> bool {
        matches!(self, T2Estimate::LowerBound(_))
    }
}

impl std::fmt::Display for T2Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            T2Estimate::Crossing(v) => write!(f, "{v:.6}"),
            T2Estimate::LowerBound(v) => write!(f, ">{v:.6}"),
        }
    }
}

/// First downward crossing of [`T2_THRESHOLD`] on sampled data, linearly
/// interpolated between the bracketing samples.
pub fn extract_t2(times: &[f64], values: &[f64]) -> Result<T2Estimate> {
    extract_threshold(times, values, T2_THRESHOLD)
}

/// First downward crossing of `threshold`.
pub fn extract_threshold(times: &[f64], values: &[f64], threshold: f64) -> Result<T2Estimate> {
    if times.len() != values.len() || times.is_empty() {
        return Err(invalid("curve", "time and value arrays must be non-empty and of equal length"));
    }
    if values[0] < threshold {
        return Err(invalid("curve", format!("starts below the threshold ({} < {threshold})", values[0])));
    }
    for k in 1..values.len() {
        if values[k] < threshold {
            let (t0, t1, v0, v1) = (times[k - 1], times[k], values[k - 1], values[k]);
            return Ok(T2Estimate::Crossing(t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0)));
        }
    }
    Ok(T2Estimate::LowerBound(*times.last().unwrap()))
}

/// Upper envelope of an oscillating curve: the maximum of each consecutive
/// window of length `window` (μs). The first sample is always kept.
pub fn upper_envelope(times: &[f64], values: &[f64], window: f64) -> (Vec<f64>, Vec<f64>) {
    let mut out_t = Vec::new();
    let mut out_v = Vec::new();
    if times.is_empty() {
        return (out_t, out_v);
    }
    out_t.push(times[0]);
    out_v.push(values[0]);
    let mut start = 1;
    while start < times.len() {
        let end_t = times[start] + window;
        let mut best = start;
        let mut k = start;
        while k < times.len() && times[k] < end_t {
            if values[k] > values[best] {
                best = k;
            }
            k += 1;
        }
        out_t.push(times[best]);
        out_v.push(values[best]);
        start = k;
    }
    (out_t, out_v)
}

/// Threshold time of a monotonically decaying analytic curve `p`, located by
/// bracketing on a geometric grid and bisection. Returns a lower bound when no
/// crossing occurs before `t_max`.
pub fn analytic_t2<F>(p: F, t_max: f64) -> Result<T2Estimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let thr = T2_THRESHOLD;
    let mut lo = 0.0;
    let mut hi = 1e-3_f64.min(t_max);
    loop {
        let v = p(hi)?;
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite probability at t = {hi}")));
        }
        if v < thr {
            break;
        }
        if hi >= t_max {
            return Ok(T2Estimate::LowerBound(t_max));
        }
        lo = hi;
        hi = (hi * 1.5).min(t_max);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid)? < thr {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(T2Estimate::Crossing(0.5 * (lo + hi)))
}

/// Per-source contributions to the dressed-qubit population decay.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCurves {
    pub t_us: Vec<f64>,
    /// `(1 + e^{−γ_m t})/2`.
    pub first_order: Vec<f64>,
    /// `(1 + |F·G|)/2`.
    pub second_order: Vec<f64>,
    /// `(1 + e^{−(γ_d t)²})/2`.
    pub drive: Vec<f64>,
    /// `(1 + |F·G|e^{−γ_m t}e^{−(γ_d t)²})/2`.
    pub combined: Vec<f64>,
}

impl BudgetCurves {
    pub fn labels() -> [&'static str; 4] {
        ["first_order", "second_order", "drive", "combined"]
    }
}

/// Evaluates the four decay curves on `times`.
pub fn noise_budget_curves(params: &EnvelopeParams, times: &[f64]) -> Result<BudgetCurves> {
    let gm = params.gamma_m_hz * HZ_TO_PER_US;
    let gd = params.gamma_d_hz * HZ_TO_PER_US;
    let mut out = BudgetCurves {
        t_us: times.to_vec(),
        first_order: Vec::with_capacity(times.len()),
        second_order: Vec::with_capacity(times.len()),
        drive: Vec::with_capacity(times.len()),
        combined: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let fg = fg_envelope(t, params)?.magnitude();
        let m = (-gm * t).exp();
        let d = (-(gd * t).powi(2)).exp();
        out.first_order.push(0.5 * (1.0 + m));
        out.second_order.push(0.5 * (1.0 + fg));
        out.drive.push(0.5 * (1.0 + d));
        out.combined.push(0.5 * (1.0 + fg * m * d));
    }
    Ok(out)
}
