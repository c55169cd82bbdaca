//! Floquet analysis of the interaction-picture drive Hamiltonian.
//!
//! The interaction-picture Hamiltonian is periodic whenever all configured
//! frequencies are rational. The one-period propagator is built with a
//! fourth-order commutator-free Magnus integrator whose exponentials are
//! evaluated in closed form (every sample of the drive is a Λ operator), and
//! its eigenphases give the dressed quasi-energies modulo `2π/T`. The physical
//! branch of each gap is chosen with a spectral estimate from a long noiseless
//! time series.

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{ip_couplings, SystemParams};
use crate::quantum_core::{dressed_transform, sz, Amp3, Op3, C64, ONE, ZERO};

use super::spectral::dominant_frequency;

/// Controls for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetConfig {
    /// Largest denominator accepted when rationalizing the frequencies.
    pub max_denominator: u64,
    /// Integrator step measured as `h·f_max` (dimensionless phase per step).
    pub phase_per_step: f64,
    /// Upper bound on the micromotion sampling interval (μs).
    pub max_sample_dt: f64,
    /// Length of the time series used for branch selection (μs).
    pub span_us: f64,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self {
            max_denominator: 64,
            phase_per_step: 0.2,
            max_sample_dt: 0.02,
            span_us: 200.0,
        }
    }
}

/// Approximate gaps used to locate the physical branch of the exact ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPrediction {
    pub e_bd: f64,
    pub e_0b: f64,
}

/// Floquet decomposition of the noiseless interaction-picture evolution.
///
/// Dressed labels are ordered `(B, D, 0)`, matching the dressed basis.
#[derive(Debug, Clone)]
pub struct FloquetSolution {
    /// Drive period `T` (μs).
    pub period: f64,
    /// Quasi-energies `(ε_B, ε_D, ε_0)` on their physical branches.
    pub quasi_energies: [f64; 3],
    /// Floquet modes at `t = 0` in the bare basis, labelled `(B, D, 0)`.
    pub modes: [Amp3; 3],
    /// One-period propagator `U(T)`.
    pub one_period: Op3,
    /// Micromotion propagators `U(jT/M)` for `j = 0..M`.
    pub samples: Vec<Op3>,
    /// Period-averaged `S_z` in the Floquet basis `(B, D, 0)`.
    pub averaged_sz: Op3,
}

impl FloquetSolution {
    /// `E_0B = ε_0 − ε_B`.
    pub fn e_0b(&self) -> f64 {
        self.quasi_energies[2] - self.quasi_energies[0]
    }

    /// `E_BD = ε_B − ε_D`.
    pub fn e_bd(&self) -> f64 {
        self.quasi_energies[0] - self.quasi_energies[1]
    }

    /// Spacing of the micromotion samples (μs).
    pub fn sample_dt(&self) -> f64 {
        self.period / self.samples.len() as f64
    }

    /// `U(nT + jT/M)`.
    pub fn propagator_at(&self, periods: u64, sample: usize) -> Op3 {
        let mut u = Op3::identity();
        for _ in 0..periods {
            u = self.one_period * u;
        }
        self.samples[sample % self.samples.len()] * u
    }

    /// Populations `|⟨U(t)φ_a(0)|ψ⟩|²` of an interaction-picture state in the
    /// instantaneous Floquet basis at `t = nT + jT/M`, ordered `(B, D, 0)`.
    pub fn floquet_populations(&self, psi: &Amp3, periods: u64, sample: usize) -> [f64; 3] {
        let u = self.propagator_at(periods, sample);
        std::array::from_fn(|a| (u * self.modes[a]).dotc(psi).norm_sqr())
    }
}

/// Smallest period `2πq` (`q ≤ max_denominator`) of the interaction-picture
/// Hamiltonian.
pub fn rational_period(params: &SystemParams, max_denominator: u64) -> Result<f64> {
    let freqs = [params.omega0, params.omega_b, params.delta1, params.delta2];
    for q in 1..=max_denominator.max(1) {
        let qf = q as f64;
        if freqs.iter().all(|&w| {
            let x = w * qf;
            (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
        }) {
            return Ok(2.0 * std::f64::consts::PI * qf);
        }
    }
    Err(invalid(
        "delta2",
        format!("frequencies are not rational with denominator ≤ {max_denominator}; round them to a coarser grid"),
    ))
}

/// Closed-form `exp(−i·Λ(a, b)·h)` for the Hermitian Λ operator with
/// `⟨+1|H|0⟩ = a`, `⟨−1|H|0⟩ = b`.
pub(crate) fn lambda_exp(a: C64, b: C64, h: f64) -> Op3 {
    let w = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if w == 0.0 {
        return Op3::identity();
    }
    let (s, c) = (w * h).sin_cos();
    let (ua, ub) = (a / w, b / w);
    let cm1 = c - 1.0;
    let mi = C64::new(0.0, -s);
    #[rustfmt::skip]
    let e = Op3::new(
        ONE + ua * ua.conj() * cm1, mi * ua,       ua * ub.conj() * cm1,
        mi * ua.conj(),             ONE * c,       mi * ub.conj(),
        ub * ua.conj() * cm1,       mi * ub,       ONE + ub * ub.conj() * cm1,
    );
    e
}

/// One commutator-free fourth-order Magnus step of the noiseless
/// interaction-picture drive, `U(t+h) ← step · U(t)`.
pub(crate) fn magnus4_ip_step(params: &SystemParams, t: f64, h: f64, drive_scale: f64) -> Op3 {
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (big, small) = (0.25 + r3 / 6.0, 0.25 - r3 / 6.0);
    let (a1, b1) = ip_couplings(params, t + c1 * h, drive_scale);
    let (a2, b2) = ip_couplings(params, t + c2 * h, drive_scale);
    let first = lambda_exp(a1 * big + a2 * small, b1 * big + b2 * small, h);
    let second = lambda_exp(a1 * small + a2 * big, b1 * small + b2 * big, h);
    second * first
}

/// Interaction-picture propagator over `[0, t]` with `steps` Magnus steps.
pub fn ip_propagator(params: &SystemParams, t: f64, steps: usize) -> Op3 {
    let h = t / steps as f64;
    let mut u = Op3::identity();
    for k in 0..steps {
        u = magnus4_ip_step(params, k as f64 * h, h, 1.0) * u;
    }
    u
}

fn wrap(x: f64, period: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI / period;
    x - w * (x / w).round()
}

fn nearest_branch(folded: f64, estimate: f64, period: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI / period;
    folded + w * ((estimate - folded) / w).round()
}

/// Eigen-decomposition of a unitary via the Hermitian pencil
/// `(U − U†)/2i + c(U + U†)/2`, which shares its eigenvectors.
fn unitary_eigen(u: &Op3) -> Result<[(C64, Amp3); 3]> {
    for c in [0.1851, 0.7243, -0.4417] {
        let k = (u - u.adjoint()) * C64::new(0.0, -0.5) + (u + u.adjoint()) * C64::from(0.5 * c);
        let eig = k.symmetric_eigen();
        let pairs: [(C64, Amp3); 3] = std::array::from_fn(|i| {
            let v: Amp3 = eig.eigenvectors.column(i).into_owned();
            ((v.adjoint() * u * v)[(0, 0)], v)
        });
        if pairs.iter().all(|(l, v)| (u * v - v * *l).norm() < 1e-8) {
            return Ok(pairs);
        }
    }
    Err(Error::Numerical("one-period propagator could not be diagonalized".into()))
}

/// Assigns eigenvectors to `(B, D, 0)` by maximizing the product of overlaps
/// with the ideal dressed states.
fn label(pairs: &[(C64, Amp3); 3]) -> [(C64, Amp3); 3] {
    let t = dressed_transform();
    let ov = |ideal: usize, k: usize| (t.row(ideal) * pairs[k].1)[(0, 0)].norm();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = perms
        .iter()
        .max_by(|p, q| {
            let s = |p: &[usize; 3]| (0..3).map(|i| ov(i, p[i])).product::<f64>();
            s(p).total_cmp(&s(q))
        })
        .expect("non-empty");
    std::array::from_fn(|i| {
        let (l, v) = pairs[best[i]];
        // Fix the gauge so the overlap with the ideal state is real positive.
        let o = (t.row(i) * v)[(0, 0)];
        let phase = if o.norm() > 0.0 { o.conj() / o.norm() } else { ONE };
        (l, v * phase)
    })
}

/// Solves the Floquet problem for the noiseless drive at `params`.
///
/// `predicted` centres the spectral searches that select the physical branch
/// of each gap (typically the second-order gaps).
pub fn solve(params: &SystemParams, cfg: &FloquetConfig, predicted: GapPrediction) -> Result<FloquetSolution> {
    params.validate()?;
    let period = rational_period(params, cfg.max_denominator)?;
    let m = ((period / cfg.max_sample_dt).ceil() as usize).next_power_of_two().max(256);
    let f_max = params.ip_max_frequency();
    let per_sample = ((period * f_max / cfg.phase_per_step) / m as f64).ceil().max(1.0) as usize;
    let h = period / (m * per_sample) as f64;

    let mut samples = Vec::with_capacity(m);
    let mut u = Op3::identity();
    for j in 0..m {
        samples.push(u);
        for k in 0..per_sample {
            let t = (j * per_sample + k) as f64 * h;
            u = magnus4_ip_step(params, t, h, 1.0) * u;
        }
    }
    let one_period = u;
    let labelled = label(&unitary_eigen(&one_period)?);
    let folded: [f64; 3] = std::array::from_fn(|i| -labelled[i].0.arg() / period);
    let modes: [Amp3; 3] = std::array::from_fn(|i| labelled[i].1);

    let d_0b = wrap(folded[2] - folded[0], period);
    let d_bd = wrap(folded[0] - folded[1], period);
    let (e_0b, e_bd) = if params.rabi == 0.0 {
        (0.0, 0.0)
    } else {
        let dt = period / m as f64;
        let t = dressed_transform();
        let n_periods = (cfg.span_us / period).ceil().max(2.0) as u64;
        let series = |psi0: Amp3, i: usize, k: usize| -> Vec<C64> {
            let mut out = Vec::with_capacity(n_periods as usize * m);
            let mut psi = psi0;
            for _ in 0..n_periods {
                for s in &samples {
                    let c = t * (s * psi);
                    out.push(c[i].conj() * c[k]);
                }
                psi = one_period * psi;
            }
            out
        };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let nyquist = std::f64::consts::PI / dt;
        let fold_width = 2.0 * std::f64::consts::PI / period;
        // Search window around a prediction: wide enough to absorb the
        // higher-order corrections, and at least one folding interval.
        let window = |centre: f64| {
            let w = 0.5 * centre.abs() + fold_width;
            ((centre - w).max(-nyquist), (centre + w).min(nyquist))
        };
        let e_bd = if predicted.e_bd.is_finite() && predicted.e_bd != 0.0 {
            let s_bd = series(t.adjoint() * Amp3::new(C64::from(r), C64::from(r), ZERO), 1, 0);
            let (lo, hi) = window(-predicted.e_bd);
            nearest_branch(d_bd, -dominant_frequency(&s_bd, dt, lo, hi, 8)?.omega, period)
        } else {
            d_bd
        };
        let s_0b = series(t.adjoint() * Amp3::new(C64::from(r), ZERO, C64::from(r)), 2, 0);
        let (lo, hi) = if predicted.e_0b.is_finite() {
            window(predicted.e_0b)
        } else {
            let half = (0.5 * e_bd.abs()).max(fold_width).min(nyquist);
            (-half, half)
        };
        let e_0b = match dominant_frequency(&s_0b, dt, lo, hi, 8) {
            Ok(peak) => nearest_branch(d_0b, peak.omega, period),
            // A vanishing gap leaves no oscillation to locate; the folded
            // value is then unambiguous.
            Err(Error::AmbiguousSpectrum(_)) if d_0b.abs() < 0.25 * fold_width => d_0b,
            Err(e) => return Err(e),
        };
        (e_0b, e_bd)
    };
    let eps_b = folded[0];
    let quasi_energies = [eps_b, eps_b - e_bd, eps_b + e_0b];

    let s = sz();
    let mut averaged_sz = Op3::zeros();
    for (j, u) in samples.iter().enumerate() {
        let tj = j as f64 * period / m as f64;
        let w: [Amp3; 3] = std::array::from_fn(|a| u * modes[a]);
        for a in 0..3 {
            for b in 0..3 {
                let phase = C64::from_polar(1.0, (quasi_energies[b] - quasi_energies[a]) * tj);
                averaged_sz[(a, b)] += w[a].dotc(&(s * w[b])) * phase;
            }
        }
    }
    averaged_sz /= C64::from(m as f64);

    Ok(FloquetSolution {
        period,
        quasi_energies,
        modes,
        one_period,
        samples,
        averaged_sz,
    })
}
