//! Trajectory propagation under piecewise-constant noise, deterministic
//! parallel ensemble averaging, and the named experiment presets.

pub mod crossval;
pub mod presets;

use rayon::prelude::*;

use crate::analytics::{extract_t2, upper_envelope, T2Estimate};
use crate::error::{invalid, require_positive, Error, Result};
use crate::hamiltonians::Tier;
use crate::noise::{Channel, NoisePath, OUParams};
use crate::quantum_core::{unitary_step_unchecked, Amp3, Op3, StateVector, C64};

/// Trajectories evaluated concurrently before their results are folded into
/// the running statistics (in index order).
const BLOCK: usize = 64;

/// The state is renormalized after this many unitary updates to remove
/// accumulated rounding.
const RENORMALIZE_EVERY: usize = 1000;

/// How each unitary step is formed when the Hamiltonian depends on time
/// between noise updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// `exp(−i·H(t + dt/2)·dt)`: the Hamiltonian frozen at the step midpoint
    /// (second order).
    FrozenMidpoint,
    /// Commutator-free fourth-order Magnus: two exact exponentials built from
    /// the Hamiltonian at the Gauss points of the step.
    Magnus4,
}

/// Simulation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub tier: Tier,
    /// Unitary step (μs).
    pub dt_unitary: f64,
    /// Noise update interval (μs); an integer multiple of `dt_unitary`.
    pub dt_noise: f64,
    /// Base grid of the noise paths. When set, `dt_noise` must equal
    /// `noise_base_dt / 2^L`, and the paths are nested refinements of the
    /// base-grid realization (so step-halving studies keep the same noise).
    pub noise_base_dt: Option<f64>,
    pub t_final: f64,
    /// Requested samples per μs; sampling snaps to the noise grid.
    pub samples_per_us: f64,
    pub initial_state: StateVector,
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub integrator: Integrator,
}

/// Largest `dt_noise / k` (integer `k`) not exceeding `1/(20·f_max)`.
pub fn auto_unitary_step(f_max: f64, dt_noise: f64) -> f64 {
    dt_noise / (dt_noise * 20.0 * f_max * (1.0 - 1e-12)).ceil().max(1.0)
}

/// Derived integer layout of a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLayout {
    pub unitary_per_noise: usize,
    pub noise_steps: usize,
    pub noise_per_sample: usize,
    pub refinement_levels: u32,
    pub base_dt: f64,
    pub base_steps: usize,
}

impl PropagationConfig {
    /// A configuration with `dt_unitary` chosen as the largest divisor of
    /// `dt_noise` satisfying the step invariant for `f_max`; two
    /// trajectories and seed 0 until set with [`Self::with_trajectories`].
    pub fn with_auto_step(
        tier: Tier,
        f_max: f64,
        dt_noise: f64,
        t_final: f64,
        samples_per_us: f64,
        initial_state: StateVector,
    ) -> Self {
        Self {
            tier,
            dt_unitary: auto_unitary_step(f_max, dt_noise),
            dt_noise,
            noise_base_dt: None,
            t_final,
            samples_per_us,
            initial_state,
            n_trajectories: 2,
            base_seed: 0,
            integrator: Integrator::Magnus4,
        }
    }

    pub fn with_trajectories(mut self, n_trajectories: usize, base_seed: u64) -> Self {
        self.n_trajectories = n_trajectories;
        self.base_seed = base_seed;
        self
    }

    /// Checks the step invariants against the largest angular frequency of
    /// the experiment and returns the integer layout.
    pub fn validate(&self, f_max: f64) -> Result<StepLayout> {
        require_positive("dt_unitary", self.dt_unitary)?;
        require_positive("dt_noise", self.dt_noise)?;
        require_positive("t_final", self.t_final)?;
        require_positive("samples_per_us", self.samples_per_us)?;
        if f_max > 0.0 && self.dt_unitary > (1.0 + 1e-9) / (20.0 * f_max) {
            return Err(Error::StepSize(format!(
                "dt_unitary = {} exceeds 1/(20·f_max) = {} (f_max = {f_max})",
                self.dt_unitary,
                1.0 / (20.0 * f_max)
            )));
        }
        let ratio = self.dt_noise / self.dt_unitary;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(Error::StepSize(format!(
                "dt_noise = {} is not an integer multiple of dt_unitary = {}",
                self.dt_noise, self.dt_unitary
            )));
        }
        let noise_per_sample = (1.0 / (self.samples_per_us * self.dt_noise)).round().max(1.0) as usize;
        let samples = (self.t_final / (noise_per_sample as f64 * self.dt_noise) + 1e-9).floor() as usize;
        let noise_steps = samples * noise_per_sample;
        let (refinement_levels, base_dt) = match self.noise_base_dt {
            None => (0, self.dt_noise),
            Some(base) => {
                require_positive("noise_base_dt", base)?;
                let l = (base / self.dt_noise).log2();
                if (l - l.round()).abs() > 1e-9 || l.round() < 0.0 {
                    return Err(Error::StepSize(format!(
                        "dt_noise = {} is not noise_base_dt = {base} divided by a power of two",
                        self.dt_noise
                    )));
                }
                (l.round() as u32, base)
            }
        };
        let per_base = 1usize << refinement_levels;
        Ok(StepLayout {
            unitary_per_noise: ratio.round() as usize,
            noise_steps,
            noise_per_sample,
            refinement_levels,
            base_dt,
            base_steps: noise_steps.div_ceil(per_base),
        })
    }
}

/// Noise values held fixed over one noise interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSample {
    /// Magnetic field `B` (rad/μs).
    pub magnetic: f64,
    /// Relative drive-amplitude error `ε`.
    pub drive: f64,
}

/// How per-trajectory signals are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Real signal; `p = mean`, `sem = std/√n`.
    Population,
    /// Complex coherence `z`; `p = (1 + |⟨z⟩|)/2`, with the standard error
    /// of the projection of each `z` on the mean phase.
    CoherenceEnvelope,
}

/// A Hamiltonian source plus its noise model and observable.
pub trait Experiment: Sync {
    /// Largest angular frequency present (sets the unitary step bound).
    fn max_frequency(&self) -> f64;
    fn magnetic_noise(&self) -> OUParams;
    fn drive_noise(&self) -> Option<OUParams> {
        None
    }
    /// Hamiltonian at `t` with the noise frozen at `noise`.
    fn hamiltonian(&self, t: f64, noise: NoiseSample) -> Op3;
    /// True when the Hamiltonian has no explicit time dependence, so one
    /// exponential covers a whole noise interval exactly.
    fn time_independent(&self) -> bool {
        false
    }
    /// Recorded signal at `t`; `noise` holds the field values at that instant.
    fn signal(&self, t: f64, psi: &Amp3, noise: NoiseSample) -> C64;
    fn reduction(&self) -> Reduction {
        Reduction::Population
    }
    /// Window (μs) for upper-envelope T2 extraction of oscillating curves.
    fn envelope_window(&self) -> Option<f64> {
        None
    }
}

/// Ensemble statistics on the sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub time_grid: Vec<f64>,
    pub p_mean: Vec<f64>,
    pub p_sem: Vec<f64>,
    pub n_trajectories: usize,
    pub t2_extracted: Option<T2Estimate>,
}

/// One commutator-free fourth-order Magnus step of `H(t)`.
pub fn magnus4_step(h: impl Fn(f64) -> Op3, t: f64, dt: f64) -> Op3 {
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (big, small) = (C64::from(0.25 + r3 / 6.0), C64::from(0.25 - r3 / 6.0));
    let (h1, h2) = (h(t + c1 * dt), h(t + c2 * dt));
    let first = unitary_step_unchecked(&(h1 * big + h2 * small), dt);
    let second = unitary_step_unchecked(&(h1 * small + h2 * big), dt);
    second * first
}

/// Noise paths of one trajectory.
pub fn trajectory_noise(
    config: &PropagationConfig,
    layout: &StepLayout,
    exp: &dyn Experiment,
    trajectory: u64,
) -> (NoisePath, Option<NoisePath>) {
    let path = |p: OUParams, ch| {
        NoisePath::generate(
            p,
            layout.base_dt,
            layout.base_steps,
            layout.refinement_levels,
            config.base_seed,
            trajectory,
            ch,
        )
    };
    (
        path(exp.magnetic_noise(), Channel::Magnetic),
        exp.drive_noise().map(|p| path(p, Channel::Drive)),
    )
}

/// Propagates one trajectory and returns the sampled signal plus the final
/// state.
pub fn propagate_trajectory(
    config: &PropagationConfig,
    exp: &dyn Experiment,
    magnetic: &NoisePath,
    drive: Option<&NoisePath>,
) -> Result<(Vec<C64>, Amp3)> {
    let layout = config.validate(exp.max_frequency())?;
    let mut psi = config.initial_state.amplitudes().clone_owned();
    let mut out = Vec::with_capacity(layout.noise_steps / layout.noise_per_sample + 1);
    let noise_at = |k: usize| NoiseSample {
        magnetic: magnetic.at_step(k),
        drive: drive.map_or(0.0, |d| d.at_step(k)),
    };
    out.push(exp.signal(0.0, &psi, noise_at(0)));
    let dt_u = config.dt_noise / layout.unitary_per_noise as f64;
    let mut since_norm = 0;
    for k in 0..layout.noise_steps {
        let noise = noise_at(k);
        let t0 = k as f64 * config.dt_noise;
        if exp.time_independent() {
            psi = unitary_step_unchecked(&exp.hamiltonian(t0, noise), config.dt_noise) * psi;
            since_norm += layout.unitary_per_noise;
        } else {
            for j in 0..layout.unitary_per_noise {
                let t = t0 + j as f64 * dt_u;
                let u = match config.integrator {
                    Integrator::FrozenMidpoint => unitary_step_unchecked(&exp.hamiltonian(t + 0.5 * dt_u, noise), dt_u),
                    Integrator::Magnus4 => magnus4_step(|s| exp.hamiltonian(s, noise), t, dt_u),
                };
                psi = u * psi;
            }
            since_norm += layout.unitary_per_noise;
        }
        if since_norm >= RENORMALIZE_EVERY {
            psi /= C64::from(psi.norm());
            since_norm = 0;
        }
        if (k + 1) % layout.noise_per_sample == 0 {
            out.push(exp.signal(t0 + config.dt_noise, &psi, noise_at(k + 1)));
        }
    }
    if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical("non-finite state during propagation".into()));
    }
    Ok((out, psi))
}

/// Running bivariate statistics of complex samples (Welford, fixed order).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: C64,
    srr: f64,
    sii: f64,
    sri: f64,
}

impl Moments {
    fn push(&mut self, z: C64) {
        self.n += 1.0;
        let (dr, di) = (z.re - self.mean.re, z.im - self.mean.im);
        self.mean.re += dr / self.n;
        self.mean.im += di / self.n;
        let (er, ei) = (z.re - self.mean.re, z.im - self.mean.im);
        self.srr += dr * er;
        self.sii += di * ei;
        self.sri += dr * ei;
    }

    fn reduce(&self, reduction: Reduction) -> (f64, f64) {
        let n = self.n;
        let denom = ((n - 1.0) * n).max(f64::MIN_POSITIVE);
        match reduction {
            Reduction::Population => (self.mean.re.clamp(0.0, 1.0), (self.srr.max(0.0) / denom).sqrt()),
            Reduction::CoherenceEnvelope => {
                let m = self.mean.norm();
                let (s, c) = if m > 0.0 {
                    (self.mean.im / m, self.mean.re / m)
                } else {
                    (0.0, 1.0)
                };
                let proj = c * c * self.srr + s * s * self.sii + 2.0 * s * c * self.sri;
                ((0.5 * (1.0 + m)).clamp(0.0, 1.0), 0.5 * (proj.max(0.0) / denom).sqrt())
            }
        }
    }
}

/// Runs `n` independent trajectories and reduces their signals. The result
/// is independent of the number of worker threads: trajectories are
/// evaluated in blocks and folded strictly in index order.
pub fn reduce_trajectories<F>(n: usize, reduction: Reduction, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(u64) -> Result<Vec<C64>> + Sync,
{
    if n < 2 {
        return Err(invalid("n_trajectories", format!("need at least 2, got {n}")));
    }
    let mut moments: Vec<Moments> = Vec::new();
    for start in (0..n).step_by(BLOCK) {
        let block: Vec<Result<Vec<C64>>> = (start..(start + BLOCK).min(n)).into_par_iter().map(|i| f(i as u64)).collect();
        for r in block {
            let signal = r?;
            if moments.is_empty() {
                moments = vec![Moments::default(); signal.len()];
            }
            if signal.len() != moments.len() {
                return Err(Error::Numerical("trajectories produced different sample counts".into()));
            }
            for (m, z) in moments.iter_mut().zip(signal) {
                m.push(z);
            }
        }
    }
    Ok(moments.iter().map(|m| m.reduce(reduction)).unzip())
}

/// T2 of a mean curve: direct threshold crossing, or on the upper envelope
/// for oscillating curves. `None` when the curve starts below threshold.
pub fn curve_t2(times: &[f64], p: &[f64], envelope_window: Option<f64>) -> Option<T2Estimate> {
    match envelope_window {
        Some(w) => {
            let (et, ev) = upper_envelope(times, p, w);
            extract_t2(&et, &ev).ok()
        }
        None => extract_t2(times, p).ok(),
    }
}

/// Monte Carlo ensemble of [`propagate_trajectory`] runs.
pub fn run_ensemble(config: &PropagationConfig, exp: &dyn Experiment) -> Result<EnsembleResult> {
    let layout = config.validate(exp.max_frequency())?;
    let (p_mean, p_sem) = reduce_trajectories(config.n_trajectories, exp.reduction(), |i| {
        let (m, d) = trajectory_noise(config, &layout, exp, i);
        Ok(propagate_trajectory(config, exp, &m, d.as_ref())?.0)
    })?;
    let sample_dt = layout.noise_per_sample as f64 * config.dt_noise;
    let time_grid: Vec<f64> = (0..p_mean.len()).map(|k| k as f64 * sample_dt).collect();
    let t2_extracted = curve_t2(&time_grid, &p_mean, exp.envelope_window());
    Ok(EnsembleResult {
        time_grid,
        p_mean,
        p_sem,
        n_trajectories: config.n_trajectories,
        t2_extracted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::{Basis, ONE, ZERO};

    /// Static two-level splitting `w` between levels 0 and 1.
    struct Splitting {
        w: f64,
        noise: OUParams,
    }

    impl Experiment for Splitting {
        fn max_frequency(&self) -> f64 {
            self.w
        }
        fn magnetic_noise(&self) -> OUParams {
            self.noise
        }
        fn hamiltonian(&self, _: f64, n: NoiseSample) -> Op3 {
            let mut h = Op3::zeros();
            h[(0, 0)] = C64::from(0.5 * self.w + n.magnetic);
            h[(1, 1)] = C64::from(-0.5 * self.w - n.magnetic);
            h
        }
        fn time_independent(&self) -> bool {
            true
        }
        fn signal(&self, _: f64, psi: &Amp3, _: NoiseSample) -> C64 {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let reference = Amp3::new(C64::from(r), C64::from(r), ZERO);
            C64::from(reference.dotc(psi).norm_sqr())
        }
    }

    fn plus() -> StateVector {
        StateVector::normalized(Amp3::new(ONE, ONE, ZERO), Basis::Bare).unwrap()
    }

    fn config(n: usize) -> PropagationConfig {
        PropagationConfig::with_auto_step(Tier::DressedEffective, 2.0, 0.05, 10.0, 20.0, plus()).with_trajectories(n, 5)
    }

    #[test]
    fn zero_hamiltonian_keeps_population() {
        let e = Splitting {
            w: 0.0,
            noise: OUParams::silent(1.0),
        };
        let r = run_ensemble(&config(3), &e).unwrap();
        assert!(r.p_mean.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(r.p_sem.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn static_splitting_oscillates_with_unit_contrast() {
        let e = Splitting {
            w: 2.0,
            noise: OUParams::silent(1.0),
        };
        let r = run_ensemble(&config(2), &e).unwrap();
        for (t, p) in r.time_grid.iter().zip(&r.p_mean) {
            assert!((p - (1.0 + (2.0 * t).cos()) / 2.0).abs() < 1e-10, "{t}: {p}");
        }
    }

    #[test]
    fn step_invariants_rejected() {
        let mut c = config(2);
        c.dt_unitary = 0.05;
        assert!(matches!(c.validate(2.0), Err(Error::StepSize(_))));
        let mut c = config(2);
        c.dt_unitary = 0.05 / 2.5;
        assert!(matches!(c.validate(0.1), Err(Error::StepSize(_))));
        let mut c = config(2);
        c.noise_base_dt = Some(0.15);
        assert!(matches!(c.validate(2.0), Err(Error::StepSize(_))));
        assert!(reduce_trajectories(1, Reduction::Population, |_| Ok(vec![])).is_err());
    }

    #[test]
    fn ensembles_are_worker_count_invariant() {
        let e = Splitting {
            w: 1.0,
            noise: OUParams::new(2.0, 0.5).unwrap(),
        };
        let c = config(150);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&c, &e)).unwrap();
        let b = four.install(|| run_ensemble(&c, &e)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn magnus_step_matches_constant_exponential() {
        let mut h = Op3::zeros();
        h[(0, 1)] = C64::new(0.3, 0.2);
        h[(1, 0)] = C64::new(0.3, -0.2);
        h[(2, 2)] = C64::from(1.5);
        let u = magnus4_step(|_| h, 0.0, 0.7);
        assert!((u - unitary_step_unchecked(&h, 0.7)).norm() < 1e-14);
    }

    #[test]
    fn sem_scales_with_trajectory_count() {
        let e = Splitting {
            w: 1.0,
            noise: OUParams::new(2.0, 0.5).unwrap(),
        };
        let median = |v: &[f64]| {
            let mut s: Vec<f64> = v[1..].to_vec();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        };
        let a = run_ensemble(&config(400), &e).unwrap();
        let b = run_ensemble(&config(800), &e).unwrap();
        let ratio = median(&b.p_sem) / median(&a.p_sem);
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }
}
