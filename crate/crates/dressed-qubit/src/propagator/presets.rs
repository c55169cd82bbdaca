//! Named experiments: driven two-level dephasing and its adiabatic oracle,
//! the full dressed spin-1 qubit, gates, and Raman sensing.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use super::{
    curve_t2, propagate_trajectory, reduce_trajectories, run_ensemble, trajectory_noise, EnsembleResult, Experiment,
    Integrator,
    NoiseSample, PropagationConfig, Reduction,
};
use crate::analytics::{analytic_t2, p_omega, EnvelopeParams, T2Estimate};
use crate::error::{invalid, require_positive, Result};
use crate::hamiltonians::{
    build_ip_drive, build_lab_frame, build_sensing, static_hamiltonian, GateMode, GateParams, SensingParams,
    SystemParams, Tier,
};
use crate::noise::{Channel, DriveNoiseParams, InitialValue, NoisePath, OUParams};
use crate::quantum_core::{sz, Amp3, Basis, Op3, StateVector, C64, I, ONE, ZERO};
use crate::stark::{numeric_solution, residual_sz, second_order_shifts, FloquetConfig};

/// Magnitude bound used for OU noise when sizing steps (six standard deviations).
fn noise_bound(p: &OUParams) -> f64 {
    6.0 * p.stationary_variance().sqrt()
}

// ---------------------------------------------------------------------------
// Driven two-level system
// ---------------------------------------------------------------------------

/// Rotating-frame two-level system `H = (Ω/2)·s_z + B(t)·s_x` (spin-½
/// operators `s = σ/2`), embedded in the first two levels of the 3×3
/// machinery with the third level decoupled. The dressed gap is
/// `½√(Ω² + 4B²)`, whose second-order shift is `B²/Ω`.
///
/// The recorded signal is the coherence `2·a₊*a₋` between the instantaneous
/// dressed eigenstates of `H(t)` (bare `|↑⟩, |↓⟩` when `Ω = 0`), so the field
/// tilt of the eigenbasis does not masquerade as decoherence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsDephasing {
    pub rabi: f64,
    pub noise: OUParams,
}

impl TlsDephasing {
    /// Eigenbasis `(|+⟩, |−⟩)` of `H` for field `b`, as columns `(c, s)`,
    /// `(−s, c)` with `c = cos(θ/2)`, `s = sin(θ/2)`, `tan θ = 2b/Ω`.
    fn eigen_rotation(&self, b: f64) -> (f64, f64) {
        if self.rabi == 0.0 {
            return (1.0, 0.0);
        }
        let half = 0.5 * (2.0 * b).atan2(self.rabi);
        (half.cos(), half.sin())
    }

    /// `(|+⟩ + i|−⟩)/√2` for the field `b`, an equal superposition of the
    /// dressed eigenstates.
    pub fn initial_state(&self, b: f64) -> StateVector {
        let (c, s) = self.eigen_rotation(b);
        let plus = Amp3::new(C64::from(c), C64::from(s), ZERO);
        let minus = Amp3::new(C64::from(-s), C64::from(c), ZERO);
        StateVector::normalized(plus + minus * I, Basis::Bare).expect("normalizable")
    }
}

/// `(|↑⟩ + i|↓⟩)/√2`, the equal superposition of the undisturbed dressed
/// eigenstates.
pub fn tls_initial_state() -> StateVector {
    StateVector::normalized(Amp3::new(ONE, I, ZERO), Basis::Bare).expect("normalizable")
}

impl Experiment for TlsDephasing {
    fn max_frequency(&self) -> f64 {
        let b = noise_bound(&self.noise);
        0.5 * (self.rabi * self.rabi + 4.0 * b * b).sqrt()
    }

    fn magnetic_noise(&self) -> OUParams {
        self.noise
    }

    fn hamiltonian(&self, _: f64, n: NoiseSample) -> Op3 {
        let mut h = Op3::zeros();
        h[(0, 0)] = C64::from(0.25 * self.rabi);
        h[(1, 1)] = C64::from(-0.25 * self.rabi);
        h[(0, 1)] = C64::from(0.5 * n.magnetic);
        h[(1, 0)] = C64::from(0.5 * n.magnetic);
        h
    }

    fn time_independent(&self) -> bool {
        true
    }

    fn signal(&self, _: f64, psi: &Amp3, n: NoiseSample) -> C64 {
        let (c, s) = self.eigen_rotation(n.magnetic);
        let a_plus = psi[0] * c + psi[1] * s;
        let a_minus = psi[1] * c - psi[0] * s;
        a_plus.conj() * a_minus * 2.0
    }

    fn reduction(&self) -> Reduction {
        Reduction::CoherenceEnvelope
    }
}

/// Simulation grid of the two-level presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsOptions {
    /// Horizon (μs); `None` picks 1.5× the analytic T2 (4·T2* without drive).
    pub t_final: Option<f64>,
    /// Approximate number of samples on the curve.
    pub samples: usize,
    /// Noise update interval; `None` picks `min(τ/100, t_final/samples)`.
    pub dt_noise: Option<f64>,
    /// Base grid for nested noise paths (see [`PropagationConfig`]).
    pub noise_base_dt: Option<f64>,
    /// Initial field value. `None` matches the closed-form envelope: with a
    /// drive, `B(0)² = cτ/2` exactly (fixed `B(0) = √(cτ/2)`); without one, a
    /// stationary draw (the Gaussian free-induction reference).
    pub initial_field: Option<InitialValue>,
}

impl Default for TlsOptions {
    fn default() -> Self {
        Self {
            t_final: None,
            samples: 2000,
            dt_noise: None,
            noise_base_dt: None,
            initial_field: None,
        }
    }
}

fn tls_config(t2_star: f64, tau: f64, rabi: f64, n: usize, seed: u64, opts: &TlsOptions) -> Result<(TlsDephasing, PropagationConfig)> {
    let noise = OUParams::from_t2_star(t2_star, tau)?;
    let noise = noise.with_initial(opts.initial_field.unwrap_or(if rabi > 0.0 {
        InitialValue::Fixed(noise.stationary_variance().sqrt())
    } else {
        InitialValue::Stationary
    }));
    if !(rabi.is_finite() && rabi >= 0.0) {
        return Err(invalid("rabi", "must be non-negative"));
    }
    let t_final = match opts.t_final {
        Some(t) => t,
        None if rabi > 0.0 => {
            let env = EnvelopeParams::from_noise(&noise, rabi);
            1.5 * analytic_t2(|t| p_omega(t, &env), 1e7)?.value()
        }
        None => 4.0 * t2_star,
    };
    require_positive("t_final", t_final)?;
    let samples = opts.samples.max(2) as f64;
    let dt_noise = opts.dt_noise.unwrap_or((tau / 100.0).min(t_final / samples));
    let exp = TlsDephasing { rabi, noise };
    // A fixed initial field fixes the initial dressed basis; with a random
    // draw the undisturbed basis is used.
    let initial = match noise.initial {
        InitialValue::Fixed(b0) => exp.initial_state(b0),
        InitialValue::Stationary => tls_initial_state(),
    };
    let mut cfg = PropagationConfig::with_auto_step(
        Tier::DressedEffective,
        exp.max_frequency(),
        dt_noise,
        t_final,
        samples / t_final,
        initial,
    )
    .with_trajectories(n, seed);
    cfg.noise_base_dt = opts.noise_base_dt;
    Ok((exp, cfg))
}

/// Monte Carlo envelope `(1 + |⟨2α*β⟩|)/2` of the driven two-level system.
pub fn preset_tls_dephasing(
    t2_star: f64,
    tau: f64,
    rabi: f64,
    n_trajectories: usize,
    base_seed: u64,
    opts: &TlsOptions,
) -> Result<EnsembleResult> {
    let (exp, cfg) = tls_config(t2_star, tau, rabi, n_trajectories, base_seed, opts)?;
    run_ensemble(&cfg, &exp)
}

/// Adiabatic-phase oracle: per trajectory `φ(t) = ½∫√(4B² + Ω²)dt'`
/// accumulated with the trapezoidal rule on the noise grid (same noise paths
/// as [`preset_tls_dephasing`] for equal seeds).
///
/// With `demodulate` the result is the envelope `(1 + |⟨e^{i(φ − Ωt/2)}⟩|)/2`;
/// otherwise the raw population `⟨(1 + cos φ)/2⟩`.
pub fn adiabatic_oracle(
    t2_star: f64,
    tau: f64,
    rabi: f64,
    n_trajectories: usize,
    base_seed: u64,
    opts: &TlsOptions,
    demodulate: bool,
) -> Result<EnsembleResult> {
    let (exp, mut cfg) = tls_config(t2_star, tau, rabi, n_trajectories, base_seed, opts)?;
    cfg.dt_unitary = cfg.dt_noise;
    let layout = cfg.validate(0.0)?;
    let reduction = if demodulate {
        Reduction::CoherenceEnvelope
    } else {
        Reduction::Population
    };
    let dt = cfg.dt_noise;
    let (p_mean, p_sem) = reduce_trajectories(n_trajectories, reduction, |i| {
        let (b, _) = trajectory_noise(&cfg, &layout, &exp, i);
        let rate = |k: usize| 0.5 * (4.0 * b.at_step(k).powi(2) + rabi * rabi).sqrt();
        let record = |phi: f64, t: f64| {
            if demodulate {
                C64::from_polar(1.0, phi - 0.5 * rabi * t)
            } else {
                C64::from(0.5 * (1.0 + phi.cos()))
            }
        };
        let mut out = vec![record(0.0, 0.0)];
        let mut phi = 0.0;
        for k in 0..layout.noise_steps {
            phi += 0.5 * dt * (rate(k) + rate(k + 1));
            if (k + 1) % layout.noise_per_sample == 0 {
                out.push(record(phi, (k + 1) as f64 * dt));
            }
        }
        Ok(out)
    })?;
    let sample_dt = layout.noise_per_sample as f64 * dt;
    let time_grid: Vec<f64> = (0..p_mean.len()).map(|k| k as f64 * sample_dt).collect();
    let t2_extracted = if demodulate { curve_t2(&time_grid, &p_mean, None) } else { None };
    Ok(EnsembleResult {
        time_grid,
        p_mean,
        p_sem,
        n_trajectories,
        t2_extracted,
    })
}

/// Envelope form of [`adiabatic_oracle`], comparable with the two-level
/// Monte Carlo and the closed-form `P_Ω(t)`.
pub fn preset_adiabatic_oracle(
    t2_star: f64,
    tau: f64,
    rabi: f64,
    n_trajectories: usize,
    base_seed: u64,
    opts: &TlsOptions,
) -> Result<EnsembleResult> {
    adiabatic_oracle(t2_star, tau, rabi, n_trajectories, base_seed, opts, true)
}

// ---------------------------------------------------------------------------
// Full dressed spin-1 qubit
// ---------------------------------------------------------------------------

/// Dressed-level data `(E_BD, E_0B, S̄_z)` tabulated over the drive amplitude
/// and interpolated with local cubics.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedTable {
    pub rabi: Vec<f64>,
    pub e_bd: Vec<f64>,
    pub e_0b: Vec<f64>,
    /// Period-averaged `S_z` in the Floquet basis `(B, D, 0)`.
    pub averaged_sz: Vec<Op3>,
    pub delta_z: f64,
}

fn lagrange_weights(xs: &[f64], x: f64) -> (usize, Vec<f64>) {
    let n = xs.len();
    if n == 1 {
        return (0, vec![1.0]);
    }
    let m = n.min(4);
    let k = xs.partition_point(|&v| v <= x);
    let start = k.saturating_sub(m / 2).min(n - m);
    let nodes = &xs[start..start + m];
    let w = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| (x - nodes[j]) / (nodes[i] - nodes[j]))
                .product()
        })
        .collect();
    (start, w)
}

impl DressedTable {
    /// Floquet solutions at `Ω(1 + k·rel_spacing)` for `k = −nodes_each_side..=nodes_each_side`.
    pub fn build(p: &SystemParams, rel_spacing: f64, nodes_each_side: usize, cfg: &FloquetConfig) -> Result<Self> {
        let ks: Vec<i64> = (-(nodes_each_side as i64)..=nodes_each_side as i64).collect();
        let sols = ks
            .par_iter()
            .map(|&k| {
                let q = p.with_rabi(p.rabi * (1.0 + k as f64 * rel_spacing));
                numeric_solution(&q, cfg).map(|(s, sol)| (q.rabi, s, sol))
            })
            .collect::<Result<Vec<_>>>()?;
        let nominal = &sols[nodes_each_side].2;
        Ok(Self {
            rabi: sols.iter().map(|s| s.0).collect(),
            e_bd: sols.iter().map(|s| s.1.e_bd).collect(),
            e_0b: sols.iter().map(|s| s.1.e_0b).collect(),
            averaged_sz: sols.iter().map(|s| s.2.averaged_sz).collect(),
            delta_z: residual_sz(nominal),
        })
    }

    /// `(E_BD, E_0B, S̄_z)` at drive amplitude `rabi`.
    pub fn eval(&self, rabi: f64) -> (f64, f64, Op3) {
        let (start, w) = lagrange_weights(&self.rabi, rabi);
        let mut out = (0.0, 0.0, Op3::zeros());
        for (i, wi) in w.iter().enumerate() {
            out.0 += wi * self.e_bd[start + i];
            out.1 += wi * self.e_0b[start + i];
            out.2 += self.averaged_sz[start + i] * C64::from(*wi);
        }
        out
    }

    /// Values at the nominal (central) node.
    pub fn nominal(&self) -> (f64, f64, Op3) {
        let c = self.rabi.len() / 2;
        (self.e_bd[c], self.e_0b[c], self.averaged_sz[c])
    }
}

/// `|ψ+⟩ = (|0⟩ + |B⟩)/√2` in the bare basis.
fn psi_plus_bare() -> Amp3 {
    StateVector::psi(1.0).bare_amplitudes()
}

/// Dressed-tier model: `H = diag(0, −E_BD, E_0B)(Ω_t) + B(t)·S̄_z(Ω_t)` in
/// the Floquet basis `(B, D, 0)`, with `Ω_t = Ω(1 + ε(t))`.
#[derive(Debug, Clone)]
pub struct NvDressed {
    pub table: DressedTable,
    pub rabi: f64,
    pub noise: OUParams,
    pub drive: Option<OUParams>,
}

impl Experiment for NvDressed {
    fn max_frequency(&self) -> f64 {
        let (e_bd, e_0b, _) = self.table.nominal();
        1.2 * (e_bd.abs() + e_0b.abs()) + noise_bound(&self.noise)
    }

    fn magnetic_noise(&self) -> OUParams {
        self.noise
    }

    fn drive_noise(&self) -> Option<OUParams> {
        self.drive
    }

    fn hamiltonian(&self, _: f64, n: NoiseSample) -> Op3 {
        let (e_bd, e_0b, m) = self.table.eval(self.rabi * (1.0 + n.drive));
        let mut h = m * C64::from(n.magnetic);
        h[(1, 1)] -= C64::from(e_bd);
        h[(2, 2)] += C64::from(e_0b);
        h
    }

    fn time_independent(&self) -> bool {
        true
    }

    fn signal(&self, _: f64, psi: &Amp3, _: NoiseSample) -> C64 {
        C64::from(0.5 * (psi[0] + psi[2]).norm_sqr())
    }

    fn envelope_window(&self) -> Option<f64> {
        Some(2.0 * PI / self.table.nominal().1.abs())
    }
}

/// Interaction-picture or lab-frame model with the full drive, magnetic
/// noise `B·S_z` and drive noise scaling the drive amplitude. Populations are
/// read in the interaction picture.
#[derive(Debug, Clone, Copy)]
pub struct NvDriven {
    pub params: SystemParams,
    pub noise: OUParams,
    pub drive: Option<OUParams>,
    /// Oscillation period used for envelope extraction (μs).
    pub window: f64,
}

impl Experiment for NvDriven {
    fn max_frequency(&self) -> f64 {
        let f = match self.params.tier {
            Tier::LabFrame => self.params.lab_max_frequency(),
            _ => self.params.ip_max_frequency(),
        };
        f + noise_bound(&self.noise)
    }

    fn magnetic_noise(&self) -> OUParams {
        self.noise
    }

    fn drive_noise(&self) -> Option<OUParams> {
        self.drive
    }

    fn hamiltonian(&self, t: f64, n: NoiseSample) -> Op3 {
        let scale = 1.0 + n.drive;
        let drive = match self.params.tier {
            Tier::LabFrame => build_lab_frame(&self.params, t, scale),
            _ => build_ip_drive(&self.params, t, scale),
        };
        drive + sz() * C64::from(n.magnetic)
    }

    fn signal(&self, t: f64, psi: &Amp3, _: NoiseSample) -> C64 {
        let psi_ip = match self.params.tier {
            Tier::LabFrame => to_interaction_picture(&self.params, t, psi),
            _ => *psi,
        };
        C64::from(psi_plus_bare().dotc(&psi_ip).norm_sqr())
    }

    fn envelope_window(&self) -> Option<f64> {
        Some(self.window)
    }
}

/// `e^{+iH0t}ψ` for a lab-frame state.
pub fn to_interaction_picture(p: &SystemParams, t: f64, psi: &Amp3) -> Amp3 {
    let h0 = static_hamiltonian(p);
    Amp3::from_fn(|k, _| psi[k] * C64::from_polar(1.0, h0[(k, k)].re * t))
}

/// Controls of [`preset_nv_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct NvFullOptions {
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub t_final: f64,
    /// `None` picks `min(τ/100, τ_Ω/100)`.
    pub dt_noise: Option<f64>,
    /// `None` samples every noise update.
    pub samples_per_us: Option<f64>,
    pub floquet: FloquetConfig,
    /// Drive-amplitude nodes on each side of the nominal value in the
    /// dressed table (spacing `δ_Ω`).
    pub table_nodes: usize,
    pub noise_base_dt: Option<f64>,
    /// Stepper of the time-dependent tiers.
    pub integrator: Integrator,
}

impl Default for NvFullOptions {
    fn default() -> Self {
        Self {
            n_trajectories: 200,
            base_seed: 1,
            t_final: 2500.0,
            dt_noise: None,
            samples_per_us: None,
            floquet: FloquetConfig::default(),
            table_nodes: 4,
            noise_base_dt: None,
            integrator: Integrator::Magnus4,
        }
    }
}

/// Result of [`preset_nv_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct NvFullRun {
    pub ensemble: EnsembleResult,
    /// Gaps at the nominal drive (numeric for the dressed tier, second
    /// order otherwise).
    pub e_bd: f64,
    pub e_0b: f64,
    /// Residual `S_z` element of the dressed qubit (dressed tier only).
    pub delta_z: Option<f64>,
}

/// Prepares `|ψ+⟩` and records `P(t) = |⟨ψ+|ψ(t)⟩|²` under magnetic and
/// drive-amplitude noise; T2 is read from the upper envelope.
pub fn preset_nv_full(
    system: &SystemParams,
    noise: &OUParams,
    drive: &DriveNoiseParams,
    opts: &NvFullOptions,
) -> Result<NvFullRun> {
    system.validate()?;
    let dt_noise = opts.dt_noise.unwrap_or((noise.tau / 100.0).min(drive.tau_omega / 100.0));
    let samples_per_us = opts.samples_per_us.unwrap_or(1.0 / dt_noise);
    let drive_ou = (drive.delta_omega > 0.0).then(|| drive.ou_params());
    let (exp, e_bd, e_0b, delta_z): (Box<dyn Experiment>, f64, f64, Option<f64>) = match system.tier {
        Tier::DressedEffective => {
            let (nodes, spacing) = if drive.delta_omega > 0.0 {
                (opts.table_nodes, drive.delta_omega)
            } else {
                (0, 0.0)
            };
            let table = DressedTable::build(system, spacing, nodes, &opts.floquet)?;
            let (e_bd, e_0b, _) = table.nominal();
            let dz = table.delta_z;
            (
                Box::new(NvDressed {
                    table,
                    rabi: system.rabi,
                    noise: *noise,
                    drive: drive_ou,
                }),
                e_bd,
                e_0b,
                Some(dz),
            )
        }
        Tier::InteractionPicture | Tier::LabFrame => {
            let so = second_order_shifts(system)?;
            (
                Box::new(NvDriven {
                    params: *system,
                    noise: *noise,
                    drive: drive_ou,
                    window: 2.0 * PI / so.e_0b.abs(),
                }),
                so.e_bd,
                so.e_0b,
                None,
            )
        }
    };
    let initial = match system.tier {
        Tier::DressedEffective => StateVector::normalized(Amp3::new(ONE, ZERO, ONE), Basis::Dressed)?,
        _ => StateVector::psi(1.0),
    };
    let mut cfg = PropagationConfig::with_auto_step(
        system.tier,
        exp.max_frequency(),
        dt_noise,
        opts.t_final,
        samples_per_us,
        initial,
    )
    .with_trajectories(opts.n_trajectories, opts.base_seed);
    cfg.noise_base_dt = opts.noise_base_dt;
    cfg.integrator = opts.integrator;
    let ensemble = run_ensemble(&cfg, exp.as_ref())?;
    Ok(NvFullRun {
        ensemble,
        e_bd,
        e_0b,
        delta_z,
    })
}

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

/// Resonant `|0⟩ ↔ |B⟩` gate in the frame rotating with the dressed levels
/// (rotating-wave form). A single field also couples `|0⟩ ↔ |D⟩`, detuned by
/// `E_BD`; magnetic noise couples `|B⟩ ↔ |D⟩` at the same detuning.
#[derive(Debug, Clone, Copy)]
pub struct GateExperiment {
    pub gate: GateParams,
    pub e_bd: f64,
    pub noise: OUParams,
    /// Dressed index of the target state (`B` = 0, `0` = 2).
    pub target: usize,
}

impl Experiment for GateExperiment {
    fn max_frequency(&self) -> f64 {
        self.e_bd.abs() + self.gate.rabi_g.abs() + noise_bound(&self.noise)
    }

    fn magnetic_noise(&self) -> OUParams {
        self.noise
    }

    fn hamiltonian(&self, t: f64, n: NoiseSample) -> Op3 {
        let e = C64::from_polar(1.0, self.gate.phase);
        let rot = C64::from_polar(1.0, self.e_bd * t);
        let mut m = Op3::zeros();
        match self.gate.mode {
            GateMode::TwoField => m[(2, 0)] = e * (self.gate.rabi_g / SQRT_2),
            GateMode::SingleField => {
                let c = self.gate.rabi_g / (2.0 * SQRT_2);
                m[(2, 0)] = e * c;
                m[(2, 1)] = e * rot * c;
            }
        }
        m[(0, 1)] += rot * n.magnetic;
        m + m.adjoint()
    }

    fn time_independent(&self) -> bool {
        self.gate.mode == GateMode::TwoField && self.noise.is_silent()
    }

    fn signal(&self, _: f64, psi: &Amp3, _: NoiseSample) -> C64 {
        C64::from(psi[self.target].norm_sqr())
    }
}

/// Controls of [`preset_gate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOptions {
    /// Pulse duration; `None` uses the π time (1 μs when `Ω_g = 0`).
    pub duration: Option<f64>,
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub samples: usize,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self {
            duration: None,
            n_trajectories: 2,
            base_seed: 1,
            samples: 400,
        }
    }
}

/// Outcome of a gate simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateResult {
    /// Target-state population over the pulse.
    pub ensemble: EnsembleResult,
    pub duration: f64,
    /// Final population of the ideal target (`|B⟩` for a π pulse, `|0⟩` for
    /// the no-op).
    pub fidelity: f64,
    pub fidelity_sem: f64,
    /// Final `|D⟩` population.
    pub leakage: f64,
}

/// Applies the gate field to `|0⟩` for a π-pulse duration.
pub fn preset_gate(gate: &GateParams, system: &SystemParams, noise: &OUParams, opts: &GateOptions) -> Result<GateResult> {
    let e_bd = second_order_shifts(system)?.e_bd;
    let duration = match opts.duration {
        Some(d) => d,
        None if gate.rabi_g != 0.0 => gate.pi_time(),
        None => 1.0,
    };
    require_positive("duration", duration)?;
    let target = if gate.rabi_g != 0.0 { 0 } else { 2 };
    let exp = GateExperiment {
        gate: *gate,
        e_bd,
        noise: *noise,
        target,
    };
    let samples = opts.samples.max(2) as f64;
    let dt_noise = duration / samples;
    let cfg = PropagationConfig::with_auto_step(
        Tier::DressedEffective,
        exp.max_frequency(),
        dt_noise,
        duration,
        samples / duration,
        StateVector::basis_state(2, Basis::Dressed),
    )
    .with_trajectories(opts.n_trajectories.max(2), opts.base_seed);
    let layout = cfg.validate(exp.max_frequency())?;
    let (mean, sem) = reduce_trajectories(cfg.n_trajectories, Reduction::Population, |i| {
        let (m, _) = trajectory_noise(&cfg, &layout, &exp, i);
        let (mut curve, psi) = propagate_trajectory(&cfg, &exp, &m, None)?;
        curve.push(C64::from(psi[1].norm_sqr()));
        Ok(curve)
    })?;
    let k = mean.len() - 1;
    let time_grid: Vec<f64> = (0..k).map(|j| j as f64 * layout.noise_per_sample as f64 * dt_noise).collect();
    Ok(GateResult {
        ensemble: EnsembleResult {
            time_grid,
            p_mean: mean[..k].to_vec(),
            p_sem: sem[..k].to_vec(),
            n_trajectories: cfg.n_trajectories,
            t2_extracted: None,
        },
        duration,
        fidelity: mean[k - 1],
        fidelity_sem: sem[k - 1],
        leakage: mean[k],
    })
}

// ---------------------------------------------------------------------------
// Raman sensing
// ---------------------------------------------------------------------------

/// Raman transfer `|B⟩ → |0⟩` via the detuned `|D⟩` (dressed frame).
#[derive(Debug, Clone, Copy)]
pub struct SensingExperiment {
    pub sensing: SensingParams,
}

impl Experiment for SensingExperiment {
    fn max_frequency(&self) -> f64 {
        let s = &self.sensing;
        s.detuning.abs() + s.signal_g.abs() + SQRT_2 * s.rabi_c.abs()
    }

    fn magnetic_noise(&self) -> OUParams {
        OUParams::silent(1.0)
    }

    fn hamiltonian(&self, t: f64, _: NoiseSample) -> Op3 {
        build_sensing(&self.sensing, t)
    }

    fn signal(&self, _: f64, psi: &Amp3, _: NoiseSample) -> C64 {
        C64::from(psi[2].norm_sqr())
    }
}

/// Closed-form Raman contrast `4a²b²/(a² + b²)²` with `a = g`, `b = √2·Ω_c`.
pub fn analytic_raman_contrast(signal_g: f64, rabi_c: f64) -> f64 {
    let (a2, b2) = (signal_g * signal_g, 2.0 * rabi_c * rabi_c);
    if a2 + b2 == 0.0 {
        0.0
    } else {
        4.0 * a2 * b2 / (a2 + b2).powi(2)
    }
}

/// Contrast scan over control amplitudes at fixed signal and detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingScan {
    pub rabi_c: Vec<f64>,
    /// Largest `|0⟩` population reached from `|B⟩`.
    pub contrast: Vec<f64>,
    pub analytic_contrast: Vec<f64>,
    pub curves: Vec<EnsembleResult>,
}

/// Simulates `|B⟩ → |0⟩` transfer for each `Ω_c` over 1.25 Raman half
/// periods `πδ/(g² + 2Ω_c²)` and records the reached contrast.
pub fn preset_sensing_raman(signal_g: f64, detuning: f64, rabi_c: &[f64], samples: usize) -> Result<SensingScan> {
    require_positive("detuning", detuning)?;
    let runs = rabi_c
        .par_iter()
        .map(|&rc| {
            let s = SensingParams {
                signal_g,
                rabi_c: rc,
                detuning,
            };
            let rate = signal_g * signal_g + 2.0 * rc * rc;
            let t_final = if rate > 0.0 { 1.25 * PI * detuning / rate } else { 1.0 };
            let exp = SensingExperiment { sensing: s };
            let n = samples.max(2) as f64;
            let cfg = PropagationConfig::with_auto_step(
                Tier::DressedEffective,
                exp.max_frequency(),
                t_final / n,
                t_final,
                n / t_final,
                StateVector::basis_state(0, Basis::Dressed),
            );
            let layout = cfg.validate(exp.max_frequency())?;
            let silent = NoisePath::generate(OUParams::silent(1.0), layout.base_dt, layout.base_steps, 0, 0, 0, Channel::Magnetic);
            let (curve, _) = propagate_trajectory(&cfg, &exp, &silent, None)?;
            let p: Vec<f64> = curve.iter().map(|z| z.re).collect();
            let contrast = p.iter().copied().fold(0.0, f64::max);
            let dt = layout.noise_per_sample as f64 * cfg.dt_noise;
            Ok((
                contrast,
                EnsembleResult {
                    time_grid: (0..p.len()).map(|k| k as f64 * dt).collect(),
                    p_sem: vec![0.0; p.len()],
                    p_mean: p,
                    n_trajectories: 1,
                    t2_extracted: None,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensingScan {
        rabi_c: rabi_c.to_vec(),
        analytic_contrast: rabi_c.iter().map(|&rc| analytic_raman_contrast(signal_g, rc)).collect(),
        contrast: runs.iter().map(|r| r.0).collect(),
        curves: runs.into_iter().map(|r| r.1).collect(),
    })
}

/// T2 of a two-level envelope from the closed form, for sizing runs.
pub fn tls_analytic_t2(t2_star: f64, tau: f64, rabi: f64) -> Result<T2Estimate> {
    let env = EnvelopeParams::from_noise(&OUParams::from_t2_star(t2_star, tau)?, rabi);
    analytic_t2(|t| p_omega(t, &env), 1e7)
}
