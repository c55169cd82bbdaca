//! Exact Ornstein-Uhlenbeck noise generation with reproducible seeded streams.
//!
//! Magnetic noise `B(t)` (angular frequency) and the relative drive-amplitude
//! error `ε(t)` are both OU processes with correlation
//! `⟨X(t)X(t')⟩ = (cτ/2)·e^{−|t−t'|/τ}`. The update rule is exact for any step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, require_positive, Result};

/// How a stream picks its value at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialValue {
    /// Draw from the stationary distribution `N(0, cτ/2)`.
    Stationary,
    /// Start from a fixed value.
    Fixed(f64),
}

/// OU parameters: correlation time `tau` (μs) and diffusion constant `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    pub tau: f64,
    pub c: f64,
    pub initial: InitialValue,
}

impl OUParams {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        require_positive("tau", tau)?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("c", format!("must be non-negative, got {c}")));
        }
        Ok(Self {
            tau,
            c,
            initial: InitialValue::Stationary,
        })
    }

    /// Magnetic noise calibrated to a free-induction time `t2_star`.
    pub fn from_t2_star(t2_star: f64, tau: f64) -> Result<Self> {
        Self::new(tau, diffusion_from_t2star(t2_star, tau)?)
    }

    /// A process that is identically zero.
    pub fn silent(tau: f64) -> Self {
        Self {
            tau,
            c: 0.0,
            initial: InitialValue::Fixed(0.0),
        }
    }

    pub fn with_initial(mut self, initial: InitialValue) -> Self {
        self.initial = initial;
        self
    }

    /// `γ = 1/τ`.
    pub fn gamma(&self) -> f64 {
        1.0 / self.tau
    }

    /// Stationary variance `cτ/2` (often written `g²`).
    pub fn stationary_variance(&self) -> f64 {
        0.5 * self.c * self.tau
    }

    pub fn is_silent(&self) -> bool {
        self.c == 0.0 && matches!(self.initial, InitialValue::Fixed(v) if v == 0.0)
    }
}

/// `c = 4/(T2*²·τ)`.
pub fn diffusion_from_t2star(t2_star: f64, tau: f64) -> Result<f64> {
    require_positive("t2_star", t2_star)?;
    require_positive("tau", tau)?;
    Ok(4.0 / (t2_star * t2_star * tau))
}

/// How the relative amplitude error `δ_Ω` maps onto the OU diffusion constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveNoiseReading {
    /// `δ_Ω` is the stationary standard deviation: `c_Ω = 2δ_Ω²/τ_Ω`.
    StdDev,
    /// `c_Ω = 2δ_Ω/τ_Ω` taken literally, so the stationary variance is `δ_Ω`.
    Literal,
}

/// Relative drive-amplitude noise `Ω(t) = Ω·(1 + ε(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveNoiseParams {
    pub delta_omega: f64,
    pub tau_omega: f64,
    pub reading: DriveNoiseReading,
}

impl DriveNoiseParams {
    pub fn new(delta_omega: f64, tau_omega: f64, reading: DriveNoiseReading) -> Result<Self> {
        if !(delta_omega.is_finite() && delta_omega >= 0.0) {
            return Err(invalid("delta_omega", format!("must be non-negative, got {delta_omega}")));
        }
        require_positive("tau_omega", tau_omega)?;
        Ok(Self {
            delta_omega,
            tau_omega,
            reading,
        })
    }

    /// Diffusion constant `c_Ω` under the selected reading.
    pub fn diffusion(&self) -> f64 {
        match self.reading {
            DriveNoiseReading::StdDev => 2.0 * self.delta_omega * self.delta_omega / self.tau_omega,
            DriveNoiseReading::Literal => 2.0 * self.delta_omega / self.tau_omega,
        }
    }

    /// Stationary standard deviation of `ε`.
    pub fn stationary_std(&self) -> f64 {
        (0.5 * self.diffusion() * self.tau_omega).sqrt()
    }

    pub fn ou_params(&self) -> OUParams {
        OUParams {
            tau: self.tau_omega,
            c: self.diffusion(),
            initial: if self.delta_omega == 0.0 {
                InitialValue::Fixed(0.0)
            } else {
                InitialValue::Stationary
            },
        }
    }
}

/// One exact OU update: `b·e^{−dt/τ} + n·√((cτ/2)(1 − e^{−2dt/τ}))`.
pub fn ou_step<R: Rng + ?Sized>(b: f64, dt: f64, params: &OUParams, rng: &mut R) -> f64 {
    let decay = (-dt / params.tau).exp();
    if params.c == 0.0 {
        return b * decay;
    }
    let n: f64 = rng.sample(StandardNormal);
    b * decay + n * (params.stationary_variance() * (1.0 - decay * decay)).sqrt()
}

/// Lorentzian power spectrum `S(ω) = (cτ/2)·2γ/(γ² + ω²)`; `S(0) = cτ²`.
pub fn psd(params: &OUParams, omega: f64) -> f64 {
    let g = params.gamma();
    params.stationary_variance() * 2.0 * g / (g * g + omega * omega)
}

/// Independent noise channels of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Channel {
    Magnetic = 1,
    Drive = 2,
}

/// Builds the generator for `(base_seed, trajectory_index, channel)`.
pub fn stream_rng(base_seed: u64, trajectory: u64, channel: Channel) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trajectory.to_le_bytes());
    seed[16..20].copy_from_slice(&(channel as u32).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// An OU sample path owned by one trajectory.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    params: OUParams,
    value: f64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(params: OUParams, base_seed: u64, trajectory: u64, channel: Channel) -> Self {
        let mut rng = stream_rng(base_seed, trajectory, channel);
        let value = match params.initial {
            InitialValue::Fixed(v) => v,
            InitialValue::Stationary => {
                let n: f64 = rng.sample(StandardNormal);
                n * params.stationary_variance().sqrt()
            }
        };
        Self { params, value, rng }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn params(&self) -> &OUParams {
        &self.params
    }

    /// Advances by `dt` and returns the new value.
    pub fn advance(&mut self, dt: f64) -> f64 {
        self.value = ou_step(self.value, dt, &self.params, &mut self.rng);
        self.value
    }
}

/// Generator for refinement level `level` of a nested path.
fn level_rng(base_seed: u64, trajectory: u64, channel: Channel, level: u32) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trajectory.to_le_bytes());
    seed[16..20].copy_from_slice(&(channel as u32).to_le_bytes());
    seed[20..24].copy_from_slice(&level.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// An OU path on a uniform grid, built on a base grid and refined dyadically
/// with exact OU-bridge midpoints.
///
/// The path at level `L` contains the level `L−1` path as its even samples,
/// so halving the step keeps the coarse realization and only inserts
/// conditionally sampled midpoints. Level 0 is identical to [`NoiseStream`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl NoisePath {
    /// Path covering `[0, base_dt·base_steps]` with step `base_dt / 2^levels`.
    pub fn generate(
        params: OUParams,
        base_dt: f64,
        base_steps: usize,
        levels: u32,
        base_seed: u64,
        trajectory: u64,
        channel: Channel,
    ) -> Self {
        let mut stream = NoiseStream::new(params, base_seed, trajectory, channel);
        let mut values = Vec::with_capacity((base_steps << levels) + 1);
        values.push(stream.value());
        for _ in 0..base_steps {
            values.push(stream.advance(base_dt));
        }
        let mut dt = base_dt;
        for level in 1..=levels {
            dt *= 0.5;
            let a = (-dt / params.tau).exp();
            let std = (params.stationary_variance() * (1.0 - a * a) / (1.0 + a * a)).sqrt();
            let mut rng = level_rng(base_seed, trajectory, channel, level);
            let mut fine = Vec::with_capacity(2 * values.len() - 1);
            for w in values.windows(2) {
                fine.push(w[0]);
                let n: f64 = if std > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                fine.push(a * (w[0] + w[1]) / (1.0 + a * a) + std * n);
            }
            fine.push(*values.last().expect("non-empty path"));
            values = fine;
        }
        Self { dt, values }
    }

    /// Value held over step `k`, i.e. on `[k·dt, (k+1)·dt)`.
    pub fn at_step(&self, k: usize) -> f64 {
        self.values[k.min(self.values.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diffusion_examples() {
        assert!((diffusion_from_t2star(5.0, 15.0).unwrap() - 4.0 / 375.0).abs() < 1e-15);
        assert!((diffusion_from_t2star(3.0, 25.0).unwrap() - 4.0 / 225.0).abs() < 1e-15);
        assert!(diffusion_from_t2star(3.0, 1e12).unwrap() < 1e-11);
        assert!(diffusion_from_t2star(0.0, 1.0).is_err());
        assert!(diffusion_from_t2star(1.0, -1.0).is_err());
    }

    #[test]
    fn psd_examples() {
        let p = OUParams::new(15.0, 0.01).unwrap();
        assert!((psd(&p, 0.0) - p.c * p.tau * p.tau).abs() < 1e-14);
        assert!((psd(&p, p.gamma()) - 0.5 * psd(&p, 0.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_diffusion_is_deterministic_decay() {
        let p = OUParams::new(2.0, 0.0).unwrap();
        let mut rng = stream_rng(1, 2, Channel::Magnetic);
        let b = ou_step(1.5, 0.7, &p, &mut rng);
        assert_eq!(b, 1.5 * (-0.35f64).exp());
    }

    #[test]
    fn long_step_forgets_initial_value() {
        let p = OUParams::new(1.0, 2.0).unwrap();
        let mut rng = stream_rng(9, 0, Channel::Magnetic);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| ou_step(50.0, 1e3, &p, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * (1.0 / n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn drive_noise_readings() {
        let std = DriveNoiseParams::new(0.005, 500.0, DriveNoiseReading::StdDev).unwrap();
        assert!((std.stationary_std() - 0.005).abs() < 1e-15);
        let lit = DriveNoiseParams::new(0.005, 500.0, DriveNoiseReading::Literal).unwrap();
        assert!((lit.diffusion() - 2.0 * 0.005 / 500.0).abs() < 1e-18);
        assert!((lit.stationary_std().powi(2) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let p = OUParams::new(10.0, 0.1).unwrap();
        let path = |seed, traj, ch| {
            let mut s = NoiseStream::new(p, seed, traj, ch);
            (0..100).map(|_| s.advance(0.1)).collect::<Vec<_>>()
        };
        assert_eq!(path(3, 4, Channel::Magnetic), path(3, 4, Channel::Magnetic));
        assert_ne!(path(3, 4, Channel::Magnetic), path(3, 4, Channel::Drive));
        assert_ne!(path(3, 4, Channel::Magnetic), path(3, 5, Channel::Magnetic));
        assert_ne!(path(3, 4, Channel::Magnetic), path(4, 4, Channel::Magnetic));
    }

    /// Sample autocorrelation at several lags over an ensemble of streams must
    /// match `(cτ/2)e^{−ℓ/τ}` within three standard errors.
    #[test]
    fn ensemble_autocorrelation_matches_exponential() {
        let p = OUParams::new(5.0, 0.4).unwrap();
        let dt = 0.5;
        let lags = [0usize, 2, 5, 10, 20];
        let n_streams = 10_000;
        let mut prods = vec![Vec::with_capacity(n_streams); lags.len()];
        for k in 0..n_streams {
            let mut s = NoiseStream::new(p, 42, k as u64, Channel::Magnetic);
            let x0 = s.value();
            let mut path = vec![x0];
            for _ in 0..*lags.last().unwrap() {
                path.push(s.advance(dt));
            }
            for (i, &l) in lags.iter().enumerate() {
                prods[i].push(x0 * path[l]);
            }
        }
        for (i, &l) in lags.iter().enumerate() {
            let v = &prods[i];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            let sem = (var / v.len() as f64).sqrt();
            let expect = p.stationary_variance() * (-(l as f64) * dt / p.tau).exp();
            assert!((mean - expect).abs() < 3.0 * sem, "lag {l}: {mean} vs {expect} ± {sem}");
        }
    }

    /// Splitting each step into k exact sub-steps leaves the statistics unchanged.
    #[test]
    fn refinement_invariance_of_variance_and_correlation() {
        let p = OUParams::new(3.0, 1.0).unwrap().with_initial(InitialValue::Fixed(1.0));
        let n = 20_000;
        let stats = |k: usize, seed: u64| {
            let mut end = Vec::with_capacity(n);
            for t in 0..n {
                let mut s = NoiseStream::new(p, seed, t as u64, Channel::Magnetic);
                for _ in 0..k {
                    s.advance(2.0 / k as f64);
                }
                end.push(s.value());
            }
            let mean = end.iter().sum::<f64>() / n as f64;
            let var = end.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, var)
        };
        let (m1, v1) = stats(1, 1);
        let (m8, v8) = stats(8, 2);
        let expect_mean = (-2.0f64 / 3.0).exp();
        let expect_var = p.stationary_variance() * (1.0 - (-4.0f64 / 3.0).exp());
        for (m, v) in [(m1, v1), (m8, v8)] {
            assert!((m - expect_mean).abs() < 4.0 * (expect_var / n as f64).sqrt());
            assert!((v - expect_var).abs() < 4.0 * expect_var * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn nested_paths_keep_coarse_samples() {
        let p = OUParams::new(3.0, 1.0).unwrap();
        let coarse = NoisePath::generate(p, 0.4, 50, 0, 7, 3, Channel::Drive);
        let fine = NoisePath::generate(p, 0.4, 50, 2, 7, 3, Channel::Drive);
        let mut stream = NoiseStream::new(p, 7, 3, Channel::Drive);
        assert_eq!(coarse.values[0], stream.value());
        assert_eq!(coarse.values[1], stream.advance(0.4));
        assert_eq!(fine.values.len(), 4 * 50 + 1);
        assert!((fine.dt - 0.1).abs() < 1e-15);
        for (k, v) in coarse.values.iter().enumerate() {
            assert_eq!(fine.values[4 * k], *v);
        }
    }

    /// Refined paths have the exact OU covariance at the finest lag.
    #[test]
    fn bridge_midpoints_have_ou_statistics() {
        let p = OUParams::new(2.0, 1.0).unwrap();
        let (n, lag) = (4000, 0.25);
        let var = p.stationary_variance();
        let (mut s0, mut s1, mut s01) = (0.0, 0.0, 0.0);
        for t in 0..n {
            let path = NoisePath::generate(p, 1.0, 2, 2, 11, t, Channel::Magnetic);
            // Sample 1 is a level-2 midpoint, sample 2 a level-1 midpoint.
            let (x, y) = (path.values[1], path.values[2]);
            s0 += x * x;
            s1 += y * y;
            s01 += x * y;
        }
        let nf = n as f64;
        let tol = 4.0 * var * (2.0 / nf).sqrt();
        assert!((s0 / nf - var).abs() < tol, "{}", s0 / nf);
        assert!((s1 / nf - var).abs() < tol, "{}", s1 / nf);
        let expect = var * (-lag / p.tau).exp();
        assert!((s01 / nf - expect).abs() < tol, "{} vs {expect}", s01 / nf);
    }

    /// Periodogram of simulated paths agrees with the Lorentzian on a coarse grid.
    #[test]
    fn periodogram_matches_lorentzian() {
        use rustfft::{num_complex::Complex64, FftPlanner};
        let p = OUParams::new(2.0, 0.5).unwrap();
        let dt = 0.05;
        let n = 4096;
        let n_paths = 400;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let bins = [4usize, 16, 40, 100];
        let mut acc = vec![Vec::new(); bins.len()];
        for k in 0..n_paths {
            let mut s = NoiseStream::new(p, 7, k, Channel::Magnetic);
            let mut buf: Vec<Complex64> = (0..n)
                .map(|_| {
                    let v = s.value();
                    s.advance(dt);
                    Complex64::new(v, 0.0)
                })
                .collect();
            fft.process(&mut buf);
            for (i, &b) in bins.iter().enumerate() {
                acc[i].push(buf[b].norm_sqr() * dt / n as f64);
            }
        }
        for (i, &b) in bins.iter().enumerate() {
            let omega = 2.0 * std::f64::consts::PI * b as f64 / (n as f64 * dt);
            let v = &acc[i];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            let sem = sd / (v.len() as f64).sqrt();
            // Sampling a continuous process aliases/leaks a little power; the
            // exact discrete-time spectrum of the sampled OU chain is used.
            let a = (-dt / p.tau).exp();
            let discrete = p.stationary_variance() * dt * (1.0 - a * a) / (1.0 - 2.0 * a * (omega * dt).cos() + a * a);
            assert!((mean - discrete).abs() < 3.0 * sem, "bin {b}: {mean} vs {discrete} ± {sem}");
            assert!((discrete - psd(&p, omega)).abs() / psd(&p, omega) < 0.02);
        }
    }

    proptest! {
        #[test]
        fn stationary_draw_variance_persists(seed in 0u64..1000) {
            let p = OUParams::new(4.0, 0.5).unwrap();
            let n = 4000;
            let mut end = Vec::with_capacity(n);
            for t in 0..n {
                let mut s = NoiseStream::new(p, seed, t as u64, Channel::Drive);
                s.advance(1.3);
                end.push(s.value());
            }
            let var = end.iter().map(|x| x * x).sum::<f64>() / n as f64;
            prop_assert!((var - 1.0).abs() < 6.0 * (2.0 / n as f64).sqrt());
        }
    }
}
