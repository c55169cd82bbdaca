//! Experiment execution for the command line: configuration in, curves,
//! tables and summary values out.

use std::f64::consts::SQRT_2;

use crate::analytics::{
    analytic_t2, noise_budget_curves, p_omega, p_total, pure_dephasing, BudgetCurves, EnvelopeParams, T2Estimate,
};
use crate::error::{Error, Result};
use crate::hamiltonians::{GateMode, GateParams, SystemParams, Tier};
use crate::noise::{DriveNoiseParams, DriveNoiseReading, OUParams};
use crate::propagator::crossval::compare_tiers;
use crate::propagator::presets::{
    preset_adiabatic_oracle, preset_gate, preset_nv_full, preset_sensing_raman, preset_tls_dephasing, tls_analytic_t2,
    GateOptions, NvFullOptions, TlsOptions,
};
use crate::propagator::{EnsembleResult, Integrator};
use crate::stark::{
    dephasing_budget, find_robust_point, lower_bound_t2_table, numeric_gaps, reference_lower_bound_rows,
    second_order_shifts, DephasingBudget, FloquetConfig, FloquetModel, GapModel, LowerBoundSettings,
    RobustSearchConfig, SecondOrderModel, SetupErrors,
};

use super::config::Config;

/// A sampled probability curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub t_us: Vec<f64>,
    pub p_mean: Vec<f64>,
    pub p_sem: Vec<f64>,
}

impl From<EnsembleResult> for Curve {
    fn from(e: EnsembleResult) -> Self {
        Self {
            t_us: e.time_grid,
            p_mean: e.p_mean,
            p_sem: e.p_sem,
        }
    }
}

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub curve: Option<Curve>,
    /// Summary values, in insertion order.
    pub results: Vec<(String, String)>,
    pub tables: Vec<Table>,
    /// Extracted coherence time, when the experiment produces one.
    pub t2: Option<T2Estimate>,
}

impl Outcome {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    fn put_t2(&mut self, t2: Option<T2Estimate>) {
        self.t2 = t2;
        match t2 {
            Some(T2Estimate::Crossing(v)) => {
                self.put("t2_us", v);
                self.put("t2_kind", "crossing");
            }
            Some(T2Estimate::LowerBound(v)) => {
                self.put("t2_us", v);
                self.put("t2_kind", "lower_bound");
            }
            None => {
                self.put("t2_us", "nan");
                self.put("t2_kind", "none");
            }
        }
    }
}

fn system(cfg: &Config) -> Result<SystemParams> {
    let p = SystemParams {
        omega0: cfg.f64("omega0_mhz"),
        omega_b: cfg.f64("omega_b_mhz"),
        rabi: cfg.f64("rabi_mhz"),
        delta1: cfg.f64("delta1_mhz"),
        delta2: cfg.f64("delta2_mhz"),
        tier: cfg.text("tier").parse::<Tier>().expect("validated tier"),
    };
    p.validate()?;
    Ok(p)
}

fn magnetic(cfg: &Config) -> Result<OUParams> {
    OUParams::from_t2_star(cfg.f64("t2_star_us"), cfg.f64("tau_us"))
}

fn drive(cfg: &Config) -> Result<DriveNoiseParams> {
    let reading = match cfg.text("drive_noise_reading") {
        "literal" => DriveNoiseReading::Literal,
        _ => DriveNoiseReading::StdDev,
    };
    DriveNoiseParams::new(cfg.f64("drive_noise_rel"), cfg.f64("tau_omega_us"), reading)
}

fn floquet(cfg: &Config) -> FloquetConfig {
    FloquetConfig {
        max_denominator: cfg.u64("floquet_max_denominator"),
        phase_per_step: cfg.f64("floquet_phase_per_step"),
        max_sample_dt: cfg.f64("floquet_max_sample_dt_us"),
        span_us: cfg.f64("floquet_span_us"),
    }
}

fn setup_errors(cfg: &Config) -> SetupErrors {
    SetupErrors {
        static_offset: cfg.f64("setup_static_offset_mhz"),
        relative_amplitude: cfg.f64("setup_relative_amplitude"),
    }
}

fn trajectories(cfg: &Config) -> usize {
    cfg.u64("n_trajectories") as usize
}

fn tls_options(cfg: &Config) -> TlsOptions {
    TlsOptions {
        t_final: cfg.f64_or_auto("t_final_us"),
        samples: cfg.u64("samples") as usize,
        dt_noise: cfg.f64_or_auto("dt_noise_us"),
        ..TlsOptions::default()
    }
}

/// Runs the configured experiment.
pub fn run_experiment(cfg: &Config) -> Result<Outcome> {
    match cfg.text("experiment") {
        "tls-dephasing" | "adiabatic-oracle" => run_tls(cfg),
        "nv-full" => run_nv_full(cfg),
        "stark" => run_stark(cfg),
        "robust-point" => run_robust_point(cfg),
        "analytic" => run_analytic(cfg),
        "gate" => run_gate(cfg),
        "sensing" => run_sensing(cfg),
        "budget" => run_budget(cfg),
        "crossval" => run_crossval(cfg),
        "lower-bound" => run_lower_bound(cfg),
        other => unreachable!("experiment `{other}` passed validation"),
    }
}

fn run_tls(cfg: &Config) -> Result<Outcome> {
    let (t2s, tau, rabi) = (cfg.f64("t2_star_us"), cfg.f64("tau_us"), cfg.f64("rabi_mhz"));
    let (n, seed) = (trajectories(cfg), cfg.u64("seed"));
    let opts = tls_options(cfg);
    let ens = if cfg.text("experiment") == "adiabatic-oracle" {
        preset_adiabatic_oracle(t2s, tau, rabi, n, seed, &opts)?
    } else {
        preset_tls_dephasing(t2s, tau, rabi, n, seed, &opts)?
    };
    let mut out = Outcome::default();
    out.put_t2(ens.t2_extracted);
    if rabi > 0.0 {
        out.put("analytic_t2_us", tls_analytic_t2(t2s, tau, rabi)?.value());
    }
    out.put("n_trajectories", ens.n_trajectories);
    out.curve = Some(ens.into());
    Ok(out)
}

fn budget_curve_table(env: &EnvelopeParams, t_max: f64, samples: usize) -> Result<Table> {
    let n = samples.max(2);
    let times: Vec<f64> = (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect();
    let c = noise_budget_curves(env, &times)?;
    let cols = [&c.first_order, &c.second_order, &c.drive, &c.combined];
    Ok(Table {
        file: "budget.csv".into(),
        header: std::iter::once("t_us")
            .chain(BudgetCurves::labels())
            .map(String::from)
            .collect(),
        rows: (0..times.len())
            .map(|k| {
                std::iter::once(c.t_us[k])
                    .chain(cols.iter().map(|col| col[k]))
                    .map(|v| v.to_string())
                    .collect()
            })
            .collect(),
    })
}

fn put_budget(out: &mut Outcome, b: &DephasingBudget) {
    out.put("gamma_m_hz", b.gamma_m);
    out.put("gamma_m_linear_hz", b.gamma_m_linear);
    out.put("gamma_d_hz", b.gamma_d);
    out.put("delta_r", b.delta_r);
    out.put("delta_z", b.delta_z);
    out.put("s_bb_zero", b.s_bb_zero);
    for (name, rate) in &b.setup_error_rates {
        out.put(&format!("setup_{name}_hz"), rate);
    }
}

fn run_nv_full(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let (noise, dn) = (magnetic(cfg)?, drive(cfg)?);
    let opts = NvFullOptions {
        n_trajectories: trajectories(cfg),
        base_seed: cfg.u64("seed"),
        t_final: cfg.f64_or_auto("t_final_us").unwrap_or(NvFullOptions::default().t_final),
        dt_noise: cfg.f64_or_auto("dt_noise_us"),
        floquet: floquet(cfg),
        integrator: integrator(cfg),
        ..NvFullOptions::default()
    };
    let run = preset_nv_full(&p, &noise, &dn, &opts)?;
    let mut out = Outcome::default();
    out.put_t2(run.ensemble.t2_extracted);
    out.put("e_bd_mhz", run.e_bd);
    out.put("e_0b_mhz", run.e_0b);
    if let Some(dz) = run.delta_z {
        out.put("delta_z", dz);
    }
    out.put("n_trajectories", run.ensemble.n_trajectories);
    if cfg.bool("emit_budget") {
        let b = dephasing_budget(&p, &noise, &dn, &setup_errors(cfg), &floquet(cfg))?;
        put_budget(&mut out, &b);
        let env = EnvelopeParams::from_noise(&noise, run.e_bd).with_rates(b.gamma_m, b.gamma_d);
        out.tables.push(budget_curve_table(&env, opts.t_final, cfg.u64("samples") as usize)?);
    }
    out.curve = Some(run.ensemble.into());
    Ok(out)
}

fn run_stark(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let so = second_order_shifts(&p)?;
    let mut out = Outcome::default();
    out.put("de_b_mhz", so.de_b);
    out.put("de_d_mhz", so.de_d);
    out.put("de_0_mhz", so.de_0);
    out.put("second_order_e_bd_mhz", so.e_bd);
    out.put("second_order_e_0b_mhz", so.e_0b);
    let num = numeric_gaps(&p, &floquet(cfg))?;
    out.put("e_bd_mhz", num.e_bd);
    out.put("e_0b_mhz", num.e_0b);
    Ok(out)
}

fn gap_model(cfg: &Config) -> Result<Box<dyn GapModel>> {
    Ok(match cfg.text("gap_model") {
        "second-order" => Box::new(SecondOrderModel),
        _ => Box::new(FloquetModel::new(floquet(cfg), cfg.f64("floquet_node_spacing_mhz"))?),
    })
}

fn run_robust_point(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let model = gap_model(cfg)?;
    let bracket = match (cfg.f64_or_auto("robust_lo_mhz"), cfg.f64_or_auto("robust_hi_mhz")) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(p.delta1 / 4.0), hi.unwrap_or(p.delta1))),
    };
    let search = RobustSearchConfig {
        bracket,
        relative_step: cfg.f64("drive_noise_rel"),
        ..RobustSearchConfig::default()
    };
    let r = find_robust_point(&p, model.as_ref(), &search)?;
    let mut out = Outcome::default();
    out.put("model", r.model);
    out.put("delta2_mhz", r.delta2);
    out.put("e_0b_mhz", r.e_0b);
    out.put("sensitivity", r.sensitivity);
    out.put("delta_r", r.delta_r);
    out.put("second_order_gap_mhz", r.second_order.de_0 - r.second_order.de_b);
    out.put("second_order_e_bd_mhz", r.second_order.e_bd);
    Ok(out)
}

fn sample_curve(t_max: f64, samples: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Curve> {
    let n = samples.max(2);
    let t_us: Vec<f64> = (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect();
    let p_mean = t_us.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    Ok(Curve {
        p_sem: vec![0.0; n],
        t_us,
        p_mean,
    })
}

fn run_analytic(cfg: &Config) -> Result<Outcome> {
    let noise = magnetic(cfg)?;
    let samples = cfg.u64("samples") as usize;
    let t2s = cfg.f64("t2_star_us");
    let mut out = Outcome::default();
    let env = match cfg.text("analytic_model") {
        "tls" => {
            let rabi = cfg.f64("rabi_mhz");
            if rabi == 0.0 {
                let t_max = cfg.f64_or_auto("t_final_us").unwrap_or(4.0 * t2s);
                out.curve = Some(sample_curve(t_max, samples, |t| Ok(pure_dephasing(t, t2s)))?);
                let t2 = analytic_t2(|t| Ok(pure_dephasing(t, t2s)), 1e7)?;
                out.put_t2(Some(t2));
                return Ok(out);
            }
            EnvelopeParams::from_noise(&noise, rabi)
        }
        _ => {
            let p = system(cfg)?;
            let gap = match cfg.f64_or_auto("gap_mhz") {
                Some(g) => g,
                None => numeric_gaps(&p, &floquet(cfg))?.e_bd,
            };
            let (gm, gd) = match (cfg.f64_or_auto("gamma_m_hz"), cfg.f64_or_auto("gamma_d_hz")) {
                (Some(gm), Some(gd)) => (gm, gd),
                (gm, gd) => {
                    let b = dephasing_budget(&p, &noise, &drive(cfg)?, &setup_errors(cfg), &floquet(cfg))?;
                    (gm.unwrap_or(b.gamma_m), gd.unwrap_or(b.gamma_d))
                }
            };
            out.put("gap_mhz", gap);
            out.put("gamma_m_hz", gm);
            out.put("gamma_d_hz", gd);
            EnvelopeParams::from_noise(&noise, gap).with_rates(gm, gd)
        }
    };
    let total = cfg.text("analytic_model") == "total";
    let curve_fn = |t: f64| if total { p_total(t, &env) } else { p_omega(t, &env) };
    let t2 = analytic_t2(curve_fn, 1e7)?;
    let t_max = cfg.f64_or_auto("t_final_us").unwrap_or(1.5 * t2.value());
    out.curve = Some(sample_curve(t_max, samples, curve_fn)?);
    out.put_t2(Some(t2));
    Ok(out)
}

fn run_gate(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let gate = GateParams {
        rabi_g: cfg.f64("gate_rabi_mhz"),
        phase: cfg.f64("gate_phase_rad"),
        mode: match cfg.text("gate_mode") {
            "single-field" => GateMode::SingleField,
            _ => GateMode::TwoField,
        },
    };
    let opts = GateOptions {
        duration: cfg.f64_or_auto("gate_duration_us"),
        n_trajectories: trajectories(cfg),
        base_seed: cfg.u64("seed"),
        samples: cfg.u64("samples") as usize,
    };
    let r = preset_gate(&gate, &p, &magnetic(cfg)?, &opts)?;
    let mut out = Outcome::default();
    out.put("duration_us", r.duration);
    out.put("fidelity", r.fidelity);
    out.put("fidelity_sem", r.fidelity_sem);
    out.put("leakage", r.leakage);
    out.curve = Some(r.ensemble.into());
    Ok(out)
}

fn run_sensing(cfg: &Config) -> Result<Outcome> {
    let g = cfg.f64("sensing_signal_mhz");
    let rc = cfg.f64("sensing_control_mhz");
    let mut scan = preset_sensing_raman(g, cfg.f64("sensing_detuning_mhz"), &[rc], cfg.u64("samples") as usize)?;
    let mut out = Outcome::default();
    out.put("contrast", scan.contrast[0]);
    out.put("analytic_contrast", scan.analytic_contrast[0]);
    out.put("raman_resonant", (g - SQRT_2 * rc).abs() <= 1e-9 * g.abs().max(1.0));
    out.curve = Some(scan.curves.remove(0).into());
    Ok(out)
}

fn run_budget(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let noise = magnetic(cfg)?;
    let fc = floquet(cfg);
    let b = dephasing_budget(&p, &noise, &drive(cfg)?, &setup_errors(cfg), &fc)?;
    let e_bd = match cfg.f64_or_auto("gap_mhz") {
        Some(g) => g,
        None => numeric_gaps(&p, &fc)?.e_bd,
    };
    let mut out = Outcome::default();
    put_budget(&mut out, &b);
    out.put("gap_mhz", e_bd);
    let env = EnvelopeParams::from_noise(&noise, e_bd).with_rates(b.gamma_m, b.gamma_d);
    let t2 = analytic_t2(|t| p_total(t, &env), 1e7)?;
    out.put_t2(Some(t2));
    let t_max = cfg.f64_or_auto("budget_t_max_us").unwrap_or(1.5 * t2.value());
    out.tables.push(budget_curve_table(&env, t_max, cfg.u64("samples") as usize)?);
    Ok(out)
}

fn run_crossval(cfg: &Config) -> Result<Outcome> {
    let p = system(cfg)?;
    let noise = magnetic(cfg)?;
    let b = cfg
        .f64_or_auto("crossval_field_mhz")
        .unwrap_or_else(|| 6.0 * noise.stationary_variance().sqrt());
    let c = compare_tiers(&p, b, cfg.f64("crossval_t_us"), &floquet(cfg))?;
    let mut out = Outcome::default();
    out.put("field_mhz", b);
    out.put("lab_vs_ip", c.lab_vs_interaction());
    out.put("dressed_vs_ip", c.dressed_vs_interaction());
    let mut header = vec!["t_us".to_string()];
    for tier in ["ip", "lab", "dressed"] {
        for level in ["b", "d", "0"] {
            header.push(format!("{tier}_{level}"));
        }
    }
    let rows = (0..c.times.len())
        .map(|k| {
            std::iter::once(c.times[k])
                .chain(c.interaction[k])
                .chain(c.lab[k])
                .chain(c.dressed[k])
                .map(|v| v.to_string())
                .collect()
        })
        .collect();
    out.tables.push(Table {
        file: "crossval.csv".into(),
        header,
        rows,
    });
    Ok(out)
}

fn run_lower_bound(cfg: &Config) -> Result<Outcome> {
    let settings = LowerBoundSettings {
        omega0: cfg.f64("omega0_mhz"),
        t2_star: cfg.f64("lb_t2_star_us"),
        taus: cfg.floats("lb_taus_us"),
        floquet: floquet(cfg),
        ..LowerBoundSettings::default()
    };
    let rows: Vec<_> = reference_lower_bound_rows()
        .into_iter()
        .map(|mut r| {
            r.gamma_d_hz = cfg.f64("lb_gamma_d_hz");
            r
        })
        .collect();
    let results = lower_bound_t2_table(&rows, &settings);
    let header = [
        "omega_b_mhz",
        "rabi_mhz",
        "delta1_mhz",
        "gamma_d_hz",
        "delta2_mhz",
        "delta2_numeric_mhz",
        "e_bd_mhz",
        "delta_z",
        "gamma_m_hz",
        "tau_us",
        "t2_us",
        "t2_kind",
        "error",
    ];
    let mut table_rows = Vec::new();
    let mut failed = 0;
    for (row, res) in rows.iter().zip(&results) {
        let lead = [row.omega_b, row.rabi, row.delta1, row.gamma_d_hz].map(|v| v.to_string());
        match res {
            Ok(r) => {
                for (tau, t2) in &r.t2 {
                    let kind = if t2.crossing().is_some() { "crossing" } else { "lower_bound" };
                    let mut line = lead.to_vec();
                    line.extend(
                        [r.delta2, r.delta2_numeric, r.e_bd, r.delta_z, r.gamma_m_hz, *tau, t2.value()]
                            .map(|v| v.to_string()),
                    );
                    line.extend([kind.to_string(), String::new()]);
                    table_rows.push(line);
                }
            }
            Err(e) => {
                failed += 1;
                let mut line = lead.to_vec();
                line.extend(std::iter::repeat(String::new()).take(8));
                line.push(csv_safe(&e.to_string()));
                table_rows.push(line);
            }
        }
    }
    let mut out = Outcome::default();
    out.put("rows", rows.len());
    out.put("rows_failed", failed);
    out.tables.push(Table {
        file: "lower_bound.csv".into(),
        header: header.map(String::from).to_vec(),
        rows: table_rows,
    });
    Ok(out)
}

/// Replaces characters that would break a plain CSV cell.
pub fn csv_safe(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Runs the experiment at every sweep value. Rows run concurrently; their
/// order follows the grid.
pub fn run_sweep(cfg: &Config) -> std::result::Result<Table, super::config::ConfigError> {
    use rayon::prelude::*;
    let param = cfg.text("sweep_param").to_string();
    let values = cfg.floats("sweep_values");
    if param.is_empty() && !values.is_empty() {
        return Err(super::config::ConfigError {
            origin: "sweep".into(),
            message: "`sweep_values` given without `sweep_param`".into(),
        });
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            let raw = if super::config::kind_of(&param) == Some(super::config::Kind::UInt) {
                format!("{}", v.round() as i64)
            } else {
                v.to_string()
            };
            c.set(&param, &raw, "sweep_values").map(|_| c)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let outcomes: Vec<Result<Outcome>> = configs.par_iter().map(run_experiment).collect();
    let mut columns: Vec<String> = Vec::new();
    for o in outcomes.iter().flatten() {
        for (k, _) in &o.results {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
    }
    let rows = values
        .iter()
        .zip(&outcomes)
        .map(|(v, o)| {
            let mut line = vec![v.to_string()];
            match o {
                Ok(o) => {
                    line.extend(columns.iter().map(|c| {
                        o.results
                            .iter()
                            .find(|(k, _)| k == c)
                            .map(|(_, v)| csv_safe(v))
                            .unwrap_or_default()
                    }));
                    line.push(String::new());
                }
                Err(e) => {
                    line.extend(columns.iter().map(|_| String::new()));
                    line.push(csv_safe(&e.to_string()));
                }
            }
            line
        })
        .collect();
    let mut header = vec![if param.is_empty() { "value".to_string() } else { param }];
    header.extend(columns);
    header.push("error".into());
    Ok(Table {
        file: "sweep.csv".into(),
        header,
        rows,
    })
}

/// Integrator selected in the configuration.
pub fn integrator(cfg: &Config) -> Integrator {
    match cfg.text("integrator") {
        "midpoint" => Integrator::FrozenMidpoint,
        _ => Integrator::Magnus4,
    }
}

/// Whether an error stems from the configuration rather than the numerics.
pub fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::InvalidParameter { .. } | Error::StepSize(_))
}
