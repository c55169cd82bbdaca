//! Stark shifts of the dressed levels, numeric gap extraction, robust-point
//! search over the blue detuning, and the dephasing-rate budget.

pub mod floquet;
pub mod spectral;

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::analytics::{analytic_t2, p_total, EnvelopeParams, T2Estimate, HZ_TO_PER_US};
use crate::error::{invalid, require_positive, Error, Result};
use crate::hamiltonians::SystemParams;
use crate::noise::{psd, DriveNoiseParams, OUParams};

pub use floquet::{FloquetConfig, FloquetSolution};

/// Shifts of the dressed levels and the resulting gaps (rad/μs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarkShifts {
    /// Second-order shift of `|B⟩`.
    pub de_b: f64,
    /// Second-order shift of `|D⟩`.
    pub de_d: f64,
    /// Second-order shift of `|0⟩`; always `−de_b − de_d`.
    pub de_0: f64,
    /// `E_B − E_D`.
    pub e_bd: f64,
    /// `E_0 − E_B`.
    pub e_0b: f64,
    /// Whether the gaps come from the numeric (all-order) solution rather
    /// than the second-order shifts.
    pub numeric_gaps: bool,
}

/// A perturbative denominator `Σ cᵢ·xᵢ` tracked with its magnitude scale.
fn denominator(term: &'static str, parts: &[(f64, f64)]) -> Result<f64> {
    let value: f64 = parts.iter().map(|(c, x)| c * x).sum();
    let scale: f64 = parts.iter().map(|(c, x)| (c * x).abs()).sum();
    if !value.is_finite() || value.abs() <= 1e-6 * scale {
        return Err(Error::Resonance { term, value });
    }
    Ok(value)
}

/// Second-order shifts of `|B⟩`, `|D⟩` and `|0⟩` with all counter-rotating
/// contributions of the four-tone drive.
pub fn second_order_shifts(p: &SystemParams) -> Result<StarkShifts> {
    p.validate()?;
    let (w0, wb, d1, d2) = (p.omega0, p.omega_b, p.delta1, p.delta2);
    let den = |term, parts: &[(f64, f64)]| denominator(term, parts).map(|d| 1.0 / d);
    let r_d1 = den("Δ1", &[(1.0, d1)])?;
    let r_d2 = den("Δ2", &[(1.0, d2)])?;
    let r_2w0_m_d1 = den("2ω0−Δ1", &[(2.0, w0), (-1.0, d1)])?;
    let r_2w0_p_d2 = den("2ω0+Δ2", &[(2.0, w0), (1.0, d2)])?;
    let r_2wb_p_d1 = den("2ωB+Δ1", &[(2.0, wb), (1.0, d1)])?;
    let r_2wb_m_d1 = den("2ωB−Δ1", &[(2.0, wb), (-1.0, d1)])?;
    let r_2wb_m_d2 = den("2ωB−Δ2", &[(2.0, wb), (-1.0, d2)])?;
    let r_2wb_p_d2 = den("2ωB+Δ2", &[(2.0, wb), (1.0, d2)])?;
    let r_a = den("2ω0−2ωB−Δ1", &[(2.0, w0), (-2.0, wb), (-1.0, d1)])?;
    let r_b = den("2ω0+2ωB−Δ1", &[(2.0, w0), (2.0, wb), (-1.0, d1)])?;
    let r_c = den("2ω0−2ωB+Δ2", &[(2.0, w0), (-2.0, wb), (1.0, d2)])?;
    let r_e = den("2ω0+2ωB+Δ2", &[(2.0, w0), (2.0, wb), (1.0, d2)])?;
    let pref = p.rabi * p.rabi / 8.0;
    let de_b = pref
        * (4.0 * r_d1 + 4.0 * r_2w0_m_d1 + r_2wb_p_d1 - r_2wb_m_d1 + r_2wb_m_d2 - r_2wb_p_d2 + r_a + r_b + r_c + r_e);
    let de_d = pref
        * (-4.0 * r_d2 + 4.0 * r_2w0_p_d2 + r_2wb_m_d2 - r_2wb_p_d2 + r_2wb_p_d1 - r_2wb_m_d1 + r_c + r_e + r_a + r_b);
    let de_0 = -de_b - de_d;
    Ok(StarkShifts {
        de_b,
        de_d,
        de_0,
        e_bd: de_b - de_d,
        e_0b: de_0 - de_b,
        numeric_gaps: false,
    })
}

/// Gaps `E_BD`, `E_0B` of the full noiseless interaction-picture evolution,
/// including all higher-order shifts. The second-order shifts are reported
/// alongside.
pub fn numeric_gaps(p: &SystemParams, cfg: &FloquetConfig) -> Result<StarkShifts> {
    let (shifts, _) = numeric_solution(p, cfg)?;
    Ok(shifts)
}

/// Like [`numeric_gaps`], also returning the Floquet decomposition.
pub fn numeric_solution(p: &SystemParams, cfg: &FloquetConfig) -> Result<(StarkShifts, FloquetSolution)> {
    let so = second_order_shifts(p)?;
    let sol = floquet::solve(
        p,
        cfg,
        floquet::GapPrediction {
            e_bd: so.e_bd,
            e_0b: so.e_0b,
        },
    )?;
    Ok((
        StarkShifts {
            e_bd: sol.e_bd(),
            e_0b: sol.e_0b(),
            numeric_gaps: true,
            ..so
        },
        sol,
    ))
}

/// A model for the `|0⟩–|B⟩` gap as a function of the drive configuration.
pub trait GapModel: Sync {
    fn name(&self) -> &'static str;
    /// `E_0B` at `p` (rad/μs).
    fn e_0b(&self, p: &SystemParams) -> Result<f64>;
    /// Evaluates several configurations; implementations may batch work.
    fn e_0b_many(&self, ps: &[SystemParams]) -> Vec<Result<f64>> {
        ps.iter().map(|p| self.e_0b(p)).collect()
    }
    /// Spacing of the `Δ2` values the model evaluates natively, if any.
    fn node_spacing(&self) -> Option<f64> {
        None
    }
}

/// `E_0B = ΔE_0 − ΔE_B` from the second-order shifts.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondOrderModel;

impl GapModel for SecondOrderModel {
    fn name(&self) -> &'static str {
        "second-order"
    }

    fn e_0b(&self, p: &SystemParams) -> Result<f64> {
        Ok(second_order_shifts(p)?.e_0b)
    }
}

/// `E_0B` from the Floquet solution, evaluated on a grid of `Δ2` nodes
/// (so that the drive stays periodic with a short period) and interpolated
/// with local cubics in between. Node values are cached.
#[derive(Debug)]
pub struct FloquetModel {
    pub config: FloquetConfig,
    /// Spacing of the `Δ2` nodes (rad/μs); must keep the nodes rational.
    pub node_spacing: f64,
    cache: Mutex<HashMap<[u64; 5], Result<f64>>>,
}

impl FloquetModel {
    pub fn new(config: FloquetConfig, node_spacing: f64) -> Result<Self> {
        require_positive("node_spacing", node_spacing)?;
        Ok(Self {
            config,
            node_spacing,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn key(p: &SystemParams) -> [u64; 5] {
        [p.omega0, p.omega_b, p.rabi, p.delta1, p.delta2].map(f64::to_bits)
    }

    fn node_params(&self, p: &SystemParams) -> Vec<SystemParams> {
        let x = p.delta2 / self.node_spacing;
        if (x - x.round()).abs() < 1e-9 {
            return vec![p.with_delta2(x.round() * self.node_spacing)];
        }
        let k = x.floor();
        (-1..=2).map(|j| p.with_delta2((k + j as f64) * self.node_spacing)).collect()
    }

    fn fill(&self, nodes: &[SystemParams]) {
        let missing: Vec<SystemParams> = {
            let cache = self.cache.lock().expect("cache poisoned");
            let mut seen = std::collections::HashSet::new();
            nodes
                .iter()
                .filter(|n| !cache.contains_key(&Self::key(n)) && seen.insert(Self::key(n)))
                .copied()
                .collect()
        };
        let values: Vec<Result<f64>> = missing
            .par_iter()
            .map(|n| numeric_gaps(n, &self.config).map(|s| s.e_0b))
            .collect();
        let mut cache = self.cache.lock().expect("cache poisoned");
        for (n, v) in missing.iter().zip(values) {
            cache.insert(Self::key(n), v);
        }
    }

    fn interpolate(&self, p: &SystemParams) -> Result<f64> {
        let nodes = self.node_params(p);
        let cache = self.cache.lock().expect("cache poisoned");
        let ys: Vec<f64> = nodes
            .iter()
            .map(|n| cache[&Self::key(n)].clone())
            .collect::<Result<_>>()?;
        if nodes.len() == 1 {
            return Ok(ys[0]);
        }
        let xs: Vec<f64> = nodes.iter().map(|n| n.delta2).collect();
        Ok((0..4)
            .map(|i| {
                let li: f64 = (0..4)
                    .filter(|&j| j != i)
                    .map(|j| (p.delta2 - xs[j]) / (xs[i] - xs[j]))
                    .product();
                li * ys[i]
            })
            .sum())
    }

    /// Number of Floquet solutions computed so far.
    pub fn cached_nodes(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

impl GapModel for FloquetModel {
    fn name(&self) -> &'static str {
        "floquet"
    }

    fn e_0b(&self, p: &SystemParams) -> Result<f64> {
        self.e_0b_many(std::slice::from_ref(p)).remove(0)
    }

    fn node_spacing(&self) -> Option<f64> {
        Some(self.node_spacing)
    }

    fn e_0b_many(&self, ps: &[SystemParams]) -> Vec<Result<f64>> {
        let nodes: Vec<SystemParams> = ps.iter().flat_map(|p| self.node_params(p)).collect();
        self.fill(&nodes);
        ps.iter().map(|p| self.interpolate(p)).collect()
    }
}

/// Controls for [`find_robust_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustSearchConfig {
    /// Search interval for `Δ2`; `None` means `(Δ1/4, Δ1)`.
    pub bracket: Option<(f64, f64)>,
    /// Largest spacing of the coarse scan (rad/μs).
    pub coarse_step: f64,
    /// Relative drive-amplitude step `δ_Ω` of the finite difference.
    pub relative_step: f64,
    /// Absolute tolerance on `Δ2` for the golden-section refinement.
    pub tolerance: f64,
    /// Objective variation below which the search reports a flat landscape.
    pub flat_tolerance: f64,
}

impl Default for RobustSearchConfig {
    fn default() -> Self {
        Self {
            bracket: None,
            coarse_step: 10.0,
            relative_step: 0.005,
            tolerance: 1e-3,
            flat_tolerance: 1e-12,
        }
    }
}

/// Result of a robust-point search.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustPoint {
    pub delta2: f64,
    /// `E_0B` of the gap model at the point.
    pub e_0b: f64,
    /// `|∂E_0B/∂Ω|` at the point (dimensionless).
    pub sensitivity: f64,
    /// `δ_r = |E_0B(Ω(1+δ_Ω)) − E_0B(Ω)| / E_0B(Ω)`.
    pub delta_r: f64,
    /// Second-order shifts at the point (`de_0 − de_b` is the achieved
    /// second-order gap).
    pub second_order: StarkShifts,
    pub model: &'static str,
}

/// Search objective: `|∂E_0B/∂Ω|` where `E_0B > 0`, `+∞` elsewhere.
/// Resonant or spectrally ambiguous configurations are excluded likewise.
fn admissible(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(Error::Resonance { .. } | Error::AmbiguousSpectrum(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn objectives(model: &dyn GapModel, base: &SystemParams, d2s: &[f64], rel: f64) -> Result<Vec<(f64, f64)>> {
    let nominal: Vec<SystemParams> = d2s.iter().map(|&d2| base.with_delta2(d2)).collect();
    let gaps = model
        .e_0b_many(&nominal)
        .into_iter()
        .map(admissible)
        .collect::<Result<Vec<_>>>()?;
    let feasible: Vec<usize> = (0..d2s.len()).filter(|&k| gaps[k].is_some_and(|e| e > 0.0)).collect();
    let shifted: Vec<SystemParams> = feasible
        .iter()
        .flat_map(|&k| {
            let p = nominal[k];
            [p.with_rabi(base.rabi * (1.0 + rel)), p.with_rabi(base.rabi * (1.0 - rel))]
        })
        .collect();
    let vals = model
        .e_0b_many(&shifted)
        .into_iter()
        .map(admissible)
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<(f64, f64)> = gaps.iter().map(|g| (g.unwrap_or(f64::NAN), f64::INFINITY)).collect();
    for (pair, &k) in vals.chunks(2).zip(&feasible) {
        if let (Some(up), Some(down)) = (pair[0], pair[1]) {
            out[k].1 = ((up - down) / (2.0 * rel * base.rabi)).abs();
        }
    }
    Ok(out)
}

/// Finds `Δ2` minimizing `|∂E_0B/∂Ω|` subject to `E_0B > 0`: a coarse scan
/// over the bracket followed by golden-section refinement.
pub fn find_robust_point(base: &SystemParams, model: &dyn GapModel, cfg: &RobustSearchConfig) -> Result<RobustPoint> {
    base.validate()?;
    require_positive("rabi", base.rabi)?;
    require_positive("relative_step", cfg.relative_step)?;
    require_positive("coarse_step", cfg.coarse_step)?;
    let (lo, hi) = cfg.bracket.unwrap_or((base.delta1 / 4.0, base.delta1));
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let n = ((hi - lo) / cfg.coarse_step).ceil().max(2.0) as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    if let Some(s) = model.node_spacing() {
        // Scan on the model's own nodes so no interpolation stencil is needed.
        grid = grid.iter().map(|x| ((x / s).round() * s).clamp(lo, hi)).collect();
        grid.dedup();
    }
    let scan: Vec<f64> = objectives(model, base, &grid, cfg.relative_step)?
        .into_iter()
        .map(|(_, f)| f)
        .collect();
    let finite: Vec<f64> = scan.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::NoRobustPoint(format!("E_0B ≤ 0 throughout ({lo}, {hi})")));
    }
    let (fmin, fmax) = finite.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
    if fmax - fmin < cfg.flat_tolerance {
        return Err(Error::NoRobustPoint("objective is flat over the bracket".into()));
    }
    let best = (0..scan.len()).min_by(|&a, &b| scan[a].total_cmp(&scan[b])).expect("non-empty");
    if best == 0 || best == scan.len() - 1 {
        let inner = if best == 0 { 1 } else { best - 1 };
        if scan[inner].is_finite() {
            return Err(Error::NoRobustPoint(format!(
                "objective decreases towards the bracket edge Δ2 = {}",
                grid[best]
            )));
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let f = |x: f64| -> Result<f64> { Ok(objectives(model, base, &[x], cfg.relative_step)?[0].1) };
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > cfg.tolerance {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d)?;
        }
    }
    // When the optimum sits on the feasibility boundary, return the feasible
    // end of the final interval.
    let mut delta2 = 0.5 * (a + b);
    if !f(delta2)?.is_finite() {
        delta2 = if f(a)?.is_finite() { a } else { b };
    }
    let (e_0b, sensitivity) = objectives(model, base, &[delta2], cfg.relative_step)?[0];
    if !sensitivity.is_finite() {
        return Err(Error::NoRobustPoint(format!("no feasible point near Δ2 = {delta2}")));
    }
    let at = base.with_delta2(delta2);
    let e_up = model.e_0b(&at.with_rabi(base.rabi * (1.0 + cfg.relative_step)))?;
    Ok(RobustPoint {
        delta2,
        e_0b,
        sensitivity,
        delta_r: ((e_up - e_0b) / e_0b).abs(),
        second_order: second_order_shifts(&at)?,
        model: model.name(),
    })
}

/// Systematic setup errors entering the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupErrors {
    /// Static field offset `gμ_B·δB_z` (rad/μs).
    pub static_offset: f64,
    /// Relative amplitude mismatch `ε` between the drive tones.
    pub relative_amplitude: f64,
}

impl Default for SetupErrors {
    fn default() -> Self {
        Self {
            static_offset: 0.01,
            relative_amplitude: 1e-3,
        }
    }
}

/// Dephasing rates of the dressed qubit (all in Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingBudget {
    /// First-order mixing rate, quadratic reading `δz²·S_BB(0)/2`.
    pub gamma_m: f64,
    /// First-order mixing rate, literal linear reading `δz·S_BB(0)`.
    pub gamma_m_linear: f64,
    /// Drive-noise rate `δ_r·δ_Ω·Ω/√2`.
    pub gamma_d: f64,
    /// `|E_0B(Ω(1+δ_Ω)) − E_0B(Ω)| / E_0B(Ω)`.
    pub delta_r: f64,
    /// Residual `S_z` matrix element of the dressed qubit,
    /// `|⟨B̃|S_z|B̃⟩ − ⟨0̃|S_z|0̃⟩|` (period averaged).
    pub delta_z: f64,
    /// `S_BB(0)` of the magnetic noise (rad²/μs).
    pub s_bb_zero: f64,
    /// Labeled setup-error rates (Hz).
    pub setup_error_rates: Vec<(&'static str, f64)>,
}

/// Inputs of [`dephasing_budget_from`] that require numeric gap solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSensitivity {
    /// `E_0B` at the nominal drive (rad/μs).
    pub e_0b: f64,
    /// `E_0B` at `Ω(1+δ_Ω)` (rad/μs).
    pub e_0b_shifted: f64,
    /// Residual `S_z` matrix element of the dressed qubit.
    pub delta_z: f64,
}

/// Evaluates the budget from precomputed gap sensitivities.
pub fn dephasing_budget_from(
    p: &SystemParams,
    noise: &OUParams,
    drive: &DriveNoiseParams,
    setup: &SetupErrors,
    gaps: &GapSensitivity,
) -> Result<DephasingBudget> {
    if gaps.e_0b == 0.0 {
        return Err(invalid("e_0b", "qubit gap vanishes; δ_r is undefined"));
    }
    let s0 = psd(noise, 0.0);
    let delta_r = ((gaps.e_0b_shifted - gaps.e_0b) / gaps.e_0b).abs();
    let per_us_to_hz = 1.0 / HZ_TO_PER_US;
    let gamma_d = delta_r * drive.delta_omega * p.rabi / 2f64.sqrt() * per_us_to_hz;
    let dz = gaps.delta_z.abs();
    let rabi2 = p.rabi * p.rabi;
    let setup_error_rates = vec![
        ("static_offset", (setup.static_offset * p.delta1 / rabi2).abs() * s0 * per_us_to_hz),
        (
            "relative_amplitude",
            (rabi2 / (p.delta1 * p.delta1)) * setup.relative_amplitude.abs() * s0 * per_us_to_hz,
        ),
    ];
    Ok(DephasingBudget {
        gamma_m: 0.5 * dz * dz * s0 * per_us_to_hz,
        gamma_m_linear: dz * s0 * per_us_to_hz,
        gamma_d,
        delta_r,
        delta_z: dz,
        s_bb_zero: s0,
        setup_error_rates,
    })
}

/// `|⟨B̃|S_z|B̃⟩ − ⟨0̃|S_z|0̃⟩|` from a Floquet solution.
pub fn residual_sz(sol: &FloquetSolution) -> f64 {
    (sol.averaged_sz[(0, 0)].re - sol.averaged_sz[(2, 2)].re).abs()
}

/// Full dephasing budget: numeric gaps at `Ω` and `Ω(1+δ_Ω)` plus the
/// residual `S_z` element of the exact dressed states.
pub fn dephasing_budget(
    p: &SystemParams,
    noise: &OUParams,
    drive: &DriveNoiseParams,
    setup: &SetupErrors,
    cfg: &FloquetConfig,
) -> Result<DephasingBudget> {
    let shifted = p.with_rabi(p.rabi * (1.0 + drive.delta_omega));
    let (nominal, sol) = numeric_solution(p, cfg)?;
    let e_shift = if drive.delta_omega == 0.0 {
        nominal.e_0b
    } else {
        numeric_gaps(&shifted, cfg)?.e_0b
    };
    dephasing_budget_from(
        p,
        noise,
        drive,
        setup,
        &GapSensitivity {
            e_0b: nominal.e_0b,
            e_0b_shifted: e_shift,
            delta_z: residual_sz(&sol),
        },
    )
}

/// One parameter row of the lower-bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundRow {
    pub omega_b: f64,
    pub rabi: f64,
    pub delta1: f64,
    /// Drive-noise rate assumed for the row (Hz).
    pub gamma_d_hz: f64,
}

/// Shared settings of the lower-bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundSettings {
    pub omega0: f64,
    pub t2_star: f64,
    /// Noise correlation times to evaluate (μs).
    pub taus: Vec<f64>,
    /// Horizon of the threshold search (μs).
    pub t_max: f64,
    pub floquet: FloquetConfig,
}

impl Default for LowerBoundSettings {
    fn default() -> Self {
        Self {
            omega0: 2870.0,
            t2_star: 3.0,
            taus: vec![5.0, 10.0, 15.0, 20.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0],
            t_max: 1e6,
            floquet: FloquetConfig::default(),
        }
    }
}

/// The reference rows: `(ωB, Ω, Δ1)` with `γ_d = 285 Hz`.
pub fn reference_lower_bound_rows() -> Vec<LowerBoundRow> {
    [(10000.0, 60.0, 300.0), (20000.0, 60.0, 300.0), (30000.0, 75.0, 400.0), (40000.0, 85.0, 450.0), (50000.0, 100.0, 500.0)]
        .into_iter()
        .map(|(omega_b, rabi, delta1)| LowerBoundRow {
            omega_b,
            rabi,
            delta1,
            gamma_d_hz: 285.0,
        })
        .collect()
}

/// Evaluated row of the lower-bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundResult {
    pub row: LowerBoundRow,
    /// Robust `Δ2` of the second-order model.
    pub delta2: f64,
    /// `Δ2` used for the numeric solution (nearest node).
    pub delta2_numeric: f64,
    pub e_bd: f64,
    pub delta_z: f64,
    pub gamma_m_hz: f64,
    /// `(τ, T2)` pairs.
    pub t2: Vec<(f64, T2Estimate)>,
}

/// Processes one row: robust point, numeric gap and mixing, then the
/// threshold time of the combined decay model for each `τ`.
pub fn lower_bound_row(row: &LowerBoundRow, settings: &LowerBoundSettings) -> Result<LowerBoundResult> {
    let base = SystemParams {
        omega0: settings.omega0,
        omega_b: row.omega_b,
        rabi: row.rabi,
        delta1: row.delta1,
        delta2: row.delta1 / 2.0,
        tier: crate::hamiltonians::Tier::DressedEffective,
    };
    let robust = find_robust_point(&base, &SecondOrderModel, &RobustSearchConfig::default())?;
    let delta2_numeric = robust.delta2.round();
    let (shifts, sol) = numeric_solution(&base.with_delta2(delta2_numeric), &settings.floquet)?;
    let delta_z = residual_sz(&sol);
    let t2 = settings
        .taus
        .iter()
        .map(|&tau| {
            let noise = OUParams::from_t2_star(settings.t2_star, tau)?;
            let gamma_m_hz = 0.5 * delta_z * delta_z * psd(&noise, 0.0) / HZ_TO_PER_US;
            let env = EnvelopeParams::from_noise(&noise, shifts.e_bd).with_rates(gamma_m_hz, row.gamma_d_hz);
            Ok((tau, analytic_t2(|t| p_total(t, &env), settings.t_max)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let noise_ref = OUParams::from_t2_star(settings.t2_star, settings.taus.first().copied().unwrap_or(15.0))?;
    Ok(LowerBoundResult {
        row: *row,
        delta2: robust.delta2,
        delta2_numeric,
        e_bd: shifts.e_bd,
        delta_z,
        gamma_m_hz: 0.5 * delta_z * delta_z * psd(&noise_ref, 0.0) / HZ_TO_PER_US,
        t2,
    })
}

/// Processes every row independently; per-row failures are kept.
pub fn lower_bound_t2_table(rows: &[LowerBoundRow], settings: &LowerBoundSettings) -> Vec<Result<LowerBoundResult>> {
    rows.par_iter().map(|r| lower_bound_row(r, settings)).collect()
}
