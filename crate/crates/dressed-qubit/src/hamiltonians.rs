//! Hamiltonian builders at three model tiers (lab frame, interaction picture
//! without the rotating-wave approximation, dressed effective), plus gate,
//! sensing and double-drive variants.
//!
//! Unless stated otherwise matrices are in the bare basis `(+1, 0, −1)`;
//! builders documented as "dressed" use `(B, D, 0)`. All frequencies are
//! angular (rad/μs) and times are in μs.

use std::f64::consts::SQRT_2;

use crate::error::{invalid, require_positive, Result};
use crate::quantum_core::{lambda_transition, spin1_operators, sz, Op3, C64, I, ZERO};

/// Model tier used for propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    LabFrame,
    InteractionPicture,
    DressedEffective,
}

impl Tier {
    pub fn name(&self) -> &'static str {
        match self {
            Tier::LabFrame => "lab",
            Tier::InteractionPicture => "ip",
            Tier::DressedEffective => "dressed",
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lab" => Ok(Tier::LabFrame),
            "ip" => Ok(Tier::InteractionPicture),
            "dressed" => Ok(Tier::DressedEffective),
            other => Err(format!("unknown tier `{other}` (expected lab|ip|dressed)")),
        }
    }
}

/// Physical configuration of the doubly driven spin-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Zero-field splitting ω0.
    pub omega0: f64,
    /// Zeeman splitting ωB.
    pub omega_b: f64,
    /// Single-transition Rabi frequency Ω of each tone.
    pub rabi: f64,
    /// Red detuning Δ1.
    pub delta1: f64,
    /// Blue detuning Δ2.
    pub delta2: f64,
    pub tier: Tier,
}

impl SystemParams {
    /// Operating point of the reference NV simulation.
    pub fn nv_default() -> Self {
        Self {
            omega0: 2870.0,
            omega_b: 20000.0,
            rabi: 70.0,
            delta1: 500.0,
            delta2: 209.0,
            tier: Tier::DressedEffective,
        }
    }

    pub fn with_rabi(mut self, rabi: f64) -> Self {
        self.rabi = rabi;
        self
    }

    pub fn with_delta2(mut self, delta2: f64) -> Self {
        self.delta2 = delta2;
        self
    }

    pub fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("omega0", self.omega0)?;
        require_positive("omega_b", self.omega_b)?;
        require_positive("delta1", self.delta1)?;
        require_positive("delta2", self.delta2)?;
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(invalid("rabi", format!("must be non-negative, got {}", self.rabi)));
        }
        Ok(())
    }

    /// Bare transition frequencies `(ω_{+1,0}, ω_{−1,0}) = (ω0+ωB, ω0−ωB)`.
    pub fn transition_frequencies(&self) -> (f64, f64) {
        (self.omega0 + self.omega_b, self.omega0 - self.omega_b)
    }

    /// The four drive tones `(ω0+ωB−Δ1, ω0−ωB−Δ1, ω0+ωB+Δ2, ω0−ωB+Δ2)` and their signs.
    pub fn drive_tones(&self) -> ([f64; 4], [f64; 4]) {
        let (wp, wm) = self.transition_frequencies();
        (
            [wp - self.delta1, wm - self.delta1, wp + self.delta2, wm + self.delta2],
            [1.0, 1.0, 1.0, -1.0],
        )
    }

    /// Scalar drive waveform `f(t) = Σ_k s_k cos(ν_k t)`.
    pub fn drive_waveform(&self, t: f64) -> f64 {
        let (nu, sign) = self.drive_tones();
        nu.iter().zip(sign).map(|(n, s)| s * (n * t).cos()).sum()
    }

    /// Largest angular frequency appearing in the lab-frame Hamiltonian.
    pub fn lab_max_frequency(&self) -> f64 {
        let (nu, _) = self.drive_tones();
        let spectral = self.omega0 + self.omega_b;
        nu.iter().fold(spectral, |m, v| m.max(v.abs())) + 2.0 * self.rabi
    }

    /// Largest angular frequency appearing in the interaction-picture drive.
    pub fn ip_max_frequency(&self) -> f64 {
        let (wp, wm) = self.transition_frequencies();
        let (nu, _) = self.drive_tones();
        let mut m = 0.0_f64;
        for n in nu {
            for w in [wp, wm] {
                m = m.max((w + n).abs()).max((w - n).abs());
            }
        }
        m + 4.0 * self.rabi
    }
}

/// `H0 = ω0·Sz² + ωB·Sz` (diagonal, bare basis).
pub fn static_hamiltonian(params: &SystemParams) -> Op3 {
    let s = sz();
    s * s * C64::from(params.omega0) + s * C64::from(params.omega_b)
}

/// Lab-frame Hamiltonian `H0 + drive_scale·Ω·X·f(t)` with `X` the Λ transition
/// operator (unit matrix elements on `|0⟩ ↔ |±1⟩`).
pub fn build_lab_frame(params: &SystemParams, t: f64, drive_scale: f64) -> Op3 {
    static_hamiltonian(params) + lambda_transition() * C64::from(drive_scale * params.rabi * params.drive_waveform(t))
}

/// Interaction-picture couplings `(⟨+1|H|0⟩, ⟨−1|H|0⟩)` of the drive with all
/// counter-rotating terms retained.
pub fn ip_couplings(params: &SystemParams, t: f64, drive_scale: f64) -> (C64, C64) {
    let amp = drive_scale * params.rabi * params.drive_waveform(t);
    let (wp, wm) = params.transition_frequencies();
    (C64::from_polar(amp, wp * t), C64::from_polar(amp, wm * t))
}

/// `e^{+iH0t}(H_lab − H0)e^{−iH0t}` in the bare basis.
pub fn build_ip_drive(params: &SystemParams, t: f64, drive_scale: f64) -> Op3 {
    let (a, b) = ip_couplings(params, t, drive_scale);
    lambda_operator(a, b)
}

/// Hermitian Λ operator with `⟨+1|H|0⟩ = a`, `⟨−1|H|0⟩ = b`.
pub fn lambda_operator(a: C64, b: C64) -> Op3 {
    #[rustfmt::skip]
    let h = Op3::new(
        ZERO, a, ZERO,
        a.conj(), ZERO, b.conj(),
        ZERO, b, ZERO,
    );
    h
}

fn sx2() -> Op3 {
    let (sx, _, _) = spin1_operators();
    sx * sx
}

/// Red-detuned pair: `−(Ω²/Δ)(2Sx² + 4Sz² − 4)`.
pub fn build_red_effective(rabi: f64, delta: f64) -> Op3 {
    let s = sz();
    (sx2() * C64::from(2.0) + s * s * C64::from(4.0) - Op3::identity() * C64::from(4.0)) * C64::from(-rabi * rabi / delta)
}

/// Blue-detuned pair: `−(Ω²/Δ)(4Sx² − 4Sz²)`.
pub fn build_blue_effective(rabi: f64, delta: f64) -> Op3 {
    let s = sz();
    (sx2() * C64::from(4.0) - s * s * C64::from(4.0)) * C64::from(-rabi * rabi / delta)
}

/// Both pairs together: `−(Ω²/Δ)(6Sx² − 4)`.
pub fn build_total_effective(rabi: f64, delta: f64) -> Op3 {
    (sx2() * C64::from(6.0) - Op3::identity() * C64::from(4.0)) * C64::from(-rabi * rabi / delta)
}

/// Magnetic noise operator for a tier.
///
/// * `LabFrame` — `b·Sz`, bare basis.
/// * `InteractionPicture` — `b(|B⟩⟨D| + h.c.)`, dressed basis (the same
///   operator: `Sz` commutes with `H0`).
/// * `DressedEffective` — `b(|B⟩⟨D|e^{−i(3/2)Δ1 t} + h.c.)`, dressed basis, in
///   the frame rotating with `−Δ1|B⟩⟨B| + (Δ1/2)|D⟩⟨D|`.
pub fn build_noise_op(tier: Tier, b: f64, params: &SystemParams, t: f64) -> Op3 {
    match tier {
        Tier::LabFrame => sz() * C64::from(b),
        Tier::InteractionPicture => bd_coupling(C64::from(b)),
        Tier::DressedEffective => bd_coupling(C64::from_polar(b, -1.5 * params.delta1 * t)),
    }
}

fn bd_coupling(z: C64) -> Op3 {
    let mut m = Op3::zeros();
    m[(0, 1)] = z;
    m[(1, 0)] = z.conj();
    m
}

/// Which gate-field configuration drives `|0⟩ ↔ |B⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    /// One field on each bare transition: couples `|0⟩` to `|B⟩` only.
    TwoField,
    /// Only the `|0⟩ ↔ |+1⟩` field: couples `|0⟩` to both `|B⟩` and `|D⟩`.
    SingleField,
}

/// Resonant single-qubit gate field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    pub rabi_g: f64,
    /// Drive phase; `π/2` rotates about the other equatorial axis.
    pub phase: f64,
    pub mode: GateMode,
}

impl GateParams {
    /// Angular Rabi rate of the resonant `|0⟩ ↔ |B⟩` oscillation: `√2·Ω_g`
    /// with two fields, `Ω_g/√2` with a single field.
    pub fn bright_rabi_rate(&self) -> f64 {
        match self.mode {
            GateMode::TwoField => SQRT_2 * self.rabi_g,
            GateMode::SingleField => self.rabi_g / SQRT_2,
        }
    }

    /// Duration of a π pulse on `|0⟩ ↔ |B⟩`.
    pub fn pi_time(&self) -> f64 {
        std::f64::consts::PI / self.bright_rabi_rate()
    }
}

/// Lab-frame gate field
/// `Ω_g[cos(ω_{−1,0}t + φ)|0⟩⟨−1| + cos(ω_{+1,0}t + φ)|0⟩⟨+1|] + h.c.` (bare basis).
pub fn build_gate(gate: &GateParams, params: &SystemParams, t: f64) -> Op3 {
    let (wp, wm) = params.transition_frequencies();
    let plus = C64::from(gate.rabi_g * (wp * t + gate.phase).cos());
    let minus = match gate.mode {
        GateMode::TwoField => C64::from(gate.rabi_g * (wm * t + gate.phase).cos()),
        GateMode::SingleField => ZERO,
    };
    lambda_operator(plus, minus)
}

/// Rotating-wave form of [`build_gate`] in the interaction picture of `H0`,
/// expressed in the dressed basis: `(Ω_g/√2)(e^{iφ}|0⟩⟨B| + h.c.)` for two
/// fields; the single-field version splits that coupling over `|B⟩` and `|D⟩`.
pub fn gate_rwa_dressed(gate: &GateParams) -> Op3 {
    let e = C64::from_polar(1.0, gate.phase);
    let mut m = Op3::zeros();
    match gate.mode {
        GateMode::TwoField => {
            m[(2, 0)] = e * (gate.rabi_g / SQRT_2);
        }
        GateMode::SingleField => {
            m[(2, 0)] = e * (gate.rabi_g / (2.0 * SQRT_2));
            m[(2, 1)] = e * (gate.rabi_g / (2.0 * SQRT_2));
        }
    }
    m + m.adjoint()
}

/// `S_y^{−1} = −i|−1⟩⟨0| + h.c.` (bare basis).
pub fn sy_minus() -> Op3 {
    let mut m = Op3::zeros();
    m[(2, 1)] = -I;
    m[(1, 2)] = I;
    m
}

/// `S_y^{+1} = i|+1⟩⟨0| + h.c.` (bare basis).
pub fn sy_plus() -> Op3 {
    let mut m = Op3::zeros();
    m[(0, 1)] = I;
    m[(1, 0)] = -I;
    m
}

/// Second-drive effective Hamiltonian in the bare basis:
/// `(Ω2²/Δ)[Sz²cos²(Ωt/√2) + Sy²sin²(Ωt/√2) + sin(√2Ωt)/(2√2)·(S_y^{−1} − S_y^{+1})]`.
pub fn build_double_drive_effective(rabi1: f64, rabi2: f64, delta: f64, t: f64) -> Op3 {
    let (_, sy, sz) = spin1_operators();
    let phase = rabi1 * t / SQRT_2;
    let (s, c) = phase.sin_cos();
    let cross = (SQRT_2 * rabi1 * t).sin() / (2.0 * SQRT_2);
    (sz * sz * C64::from(c * c) + sy * sy * C64::from(s * s) + (sy_minus() - sy_plus()) * C64::from(cross))
        * C64::from(rabi2 * rabi2 / delta)
}

/// Raman sensing fields in the dressed interaction frame (dressed basis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingParams {
    /// Signal amplitude `g` coupling `|B⟩ ↔ |D⟩`.
    pub signal_g: f64,
    /// Control Rabi frequency Ω_c on each `|0⟩ ↔ |±1⟩` line.
    pub rabi_c: f64,
    /// One-photon detuning δ shared by signal and control.
    pub detuning: f64,
}

impl SensingParams {
    /// `√2·Ω_c = g` within relative tolerance `tol`.
    pub fn is_raman_resonant(&self, tol: f64) -> bool {
        let lhs = SQRT_2 * self.rabi_c;
        (lhs - self.signal_g).abs() <= tol * lhs.abs().max(self.signal_g.abs())
    }
}

/// `g(|B⟩⟨D|e^{−iδt} + h.c.) + √2Ω_c(|0⟩⟨D|e^{−iδt} + h.c.)` (dressed basis).
///
/// The control field drives both bare transitions with opposite phase, so its
/// matrix element onto `|D⟩ = (|+1⟩ − |−1⟩)/√2` is `√2·Ω_c`.
pub fn build_sensing(sensing: &SensingParams, t: f64) -> Op3 {
    let e = C64::from_polar(1.0, -sensing.detuning * t);
    let mut m = Op3::zeros();
    m[(0, 1)] = e * sensing.signal_g;
    m[(2, 1)] = e * (SQRT_2 * sensing.rabi_c);
    m + m.adjoint()
}

/// Three quasi-energies `(ε_B, ε_D, ε_0)` as a diagonal dressed-basis matrix.
pub fn dressed_levels(e_b: f64, e_d: f64, e_0: f64) -> Op3 {
    Op3::from_diagonal(&nalgebra::Vector3::new(C64::from(e_b), C64::from(e_d), C64::from(e_0)))
}
