//! Agreement of the three model tiers on a short noiseless evolution with a
//! constant field offset.
//!
//! All tiers start from `(|B̃⟩ + |0̃⟩)/√2` built from the Floquet modes and are
//! compared through their populations in the instantaneous Floquet basis.

use std::f64::consts::FRAC_1_SQRT_2;

use super::magnus4_step;
use super::presets::to_interaction_picture;
use crate::error::{require_positive, Result};
use crate::hamiltonians::{build_ip_drive, build_lab_frame, SystemParams};
use crate::quantum_core::{sz, unitary_step_unchecked, Amp3, Op3, C64};
use crate::stark::{numeric_solution, FloquetConfig};

/// Largest phase `h·f_max` accepted per Magnus step in the comparison.
const PHASE_PER_STEP: f64 = 0.05;

/// Populations `(B, D, 0)` of each tier at common sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TierComparison {
    pub times: Vec<f64>,
    pub lab: Vec<[f64; 3]>,
    pub interaction: Vec<[f64; 3]>,
    pub dressed: Vec<[f64; 3]>,
}

impl TierComparison {
    fn max_gap(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| (0..3).map(move |k| (x[k] - y[k]).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest population difference between lab and interaction picture.
    pub fn lab_vs_interaction(&self) -> f64 {
        Self::max_gap(&self.lab, &self.interaction)
    }

    /// Largest population difference between dressed and interaction picture.
    pub fn dressed_vs_interaction(&self) -> f64 {
        Self::max_gap(&self.dressed, &self.interaction)
    }
}

fn evolve(h: impl Fn(f64) -> Op3 + Copy, psi: Amp3, t0: f64, t1: f64, f_max: f64) -> Amp3 {
    let steps = ((t1 - t0) * f_max / PHASE_PER_STEP).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    (0..steps).fold(psi, |psi, k| magnus4_step(h, t0 + k as f64 * dt, dt) * psi)
}

/// Evolves all tiers under a constant offset `b` (rad/μs) up to `t_final`
/// and samples them on the Floquet micromotion grid.
pub fn compare_tiers(p: &SystemParams, b: f64, t_final: f64, cfg: &FloquetConfig) -> Result<TierComparison> {
    require_positive("t_final", t_final)?;
    let (_, sol) = numeric_solution(p, cfg)?;
    let dt_s = sol.sample_dt();
    let n_samples = (t_final / dt_s).floor() as usize;
    let m = sol.samples.len();
    let offset = sz() * C64::from(b);
    let psi0 = (sol.modes[0] + sol.modes[2]) * C64::from(FRAC_1_SQRT_2);

    let h_ip = |t: f64| build_ip_drive(p, t, 1.0) + offset;
    let h_lab = |t: f64| build_lab_frame(p, t, 1.0) + offset;
    let mut h_dressed = sol.averaged_sz * C64::from(b);
    h_dressed[(1, 1)] -= C64::from(sol.e_bd());
    h_dressed[(2, 2)] += C64::from(sol.e_0b());
    let u_dressed = unitary_step_unchecked(&h_dressed, dt_s);

    let mut out = TierComparison {
        times: Vec::with_capacity(n_samples + 1),
        lab: Vec::new(),
        interaction: Vec::new(),
        dressed: Vec::new(),
    };
    let (mut ip, mut lab) = (psi0, psi0);
    let mut dressed = Amp3::new(C64::from(FRAC_1_SQRT_2), C64::from(0.0), C64::from(FRAC_1_SQRT_2));
    for j in 0..=n_samples {
        let t = j as f64 * dt_s;
        if j > 0 {
            let t0 = t - dt_s;
            ip = evolve(h_ip, ip, t0, t, p.ip_max_frequency() + b.abs());
            lab = evolve(h_lab, lab, t0, t, p.lab_max_frequency() + b.abs());
            dressed = u_dressed * dressed;
        }
        let (periods, sample) = ((j / m) as u64, j % m);
        out.times.push(t);
        out.interaction.push(sol.floquet_populations(&ip, periods, sample));
        out.lab
            .push(sol.floquet_populations(&to_interaction_picture(p, t, &lab), periods, sample));
        out.dressed.push(std::array::from_fn(|k| dressed[k].norm_sqr()));
    }
    Ok(out)
}
