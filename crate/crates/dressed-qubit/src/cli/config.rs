//! Flat, typed `key = value` configuration with unit-suffixed keys.
//!
//! Syntax: one `key = value` pair per line; `#` starts a comment; blank lines
//! are ignored; keys may appear at most once per file. Every key has a
//! default (the reference operating point), so an empty file is valid.
//! Values marked `auto` are derived from the other parameters at run time.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

/// Value type of a configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    /// A float or the literal `auto`.
    FloatOrAuto,
    UInt,
    Bool,
    /// One of a fixed set of words.
    Choice(&'static [&'static str]),
    /// Comma-separated floats (possibly empty).
    FloatList,
    /// Free text (no whitespace).
    Text,
}

/// Schema entry.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Key {
    Key { name, kind, default, doc }
}

pub const EXPERIMENTS: &[&str] = &[
    "tls-dephasing",
    "adiabatic-oracle",
    "nv-full",
    "stark",
    "robust-point",
    "analytic",
    "gate",
    "sensing",
    "budget",
    "crossval",
    "lower-bound",
];

use Kind::*;

/// The complete schema, in documentation order.
pub const SCHEMA: &[Key] = &[
    key("experiment", Choice(EXPERIMENTS), "nv-full", "experiment executed by `run`"),
    // System.
    key("omega0_mhz", Float, "2870", "zero-field splitting ω0"),
    key("omega_b_mhz", Float, "20000", "Zeeman splitting ωB"),
    key("rabi_mhz", Float, "70", "Rabi frequency Ω of each drive tone"),
    key("delta1_mhz", Float, "500", "red detuning Δ1"),
    key("delta2_mhz", Float, "209", "blue detuning Δ2"),
    key("tier", Choice(&["dressed", "ip", "lab"]), "dressed", "model tier of the spin-1 simulation"),
    // Noise.
    key("t2_star_us", Float, "5", "free-induction time T2* of the magnetic noise"),
    key("tau_us", Float, "15", "magnetic-noise correlation time τ"),
    key("drive_noise_rel", Float, "0.005", "relative drive-amplitude error δ_Ω"),
    key("tau_omega_us", Float, "500", "drive-noise correlation time τ_Ω"),
    key(
        "drive_noise_reading",
        Choice(&["stddev", "literal"]),
        "stddev",
        "δ_Ω as stationary standard deviation, or c_Ω = 2δ_Ω/τ_Ω verbatim",
    ),
    // Run controls.
    key("n_trajectories", UInt, "200", "Monte Carlo trajectories"),
    key("seed", UInt, "1", "base seed of all noise streams"),
    key("t_final_us", FloatOrAuto, "auto", "simulated horizon"),
    key("dt_noise_us", FloatOrAuto, "auto", "noise update interval"),
    key("samples", UInt, "2000", "points on generated curves"),
    key("integrator", Choice(&["magnus4", "midpoint"]), "magnus4", "stepper for time-dependent tiers"),
    key("require_t2_crossing", Bool, "false", "treat a missing threshold crossing as a numerical failure"),
    key("emit_budget", Bool, "false", "also write per-source decay curves (nv-full)"),
    // Analytic curves.
    key("analytic_model", Choice(&["tls", "total"]), "tls", "closed-form curve: two-level envelope or full decay model"),
    key("gap_mhz", FloatOrAuto, "auto", "protecting gap of the full decay model (auto: numeric E_BD)"),
    key("gamma_m_hz", FloatOrAuto, "auto", "mixing dephasing rate (auto: dephasing budget)"),
    key("gamma_d_hz", FloatOrAuto, "auto", "drive dephasing rate (auto: dephasing budget)"),
    // Gates and sensing.
    key("gate_rabi_mhz", Float, "10", "gate field Rabi frequency Ω_g"),
    key("gate_phase_rad", Float, "0", "gate field phase"),
    key("gate_mode", Choice(&["two-field", "single-field"]), "two-field", "gate drive configuration"),
    key("gate_duration_us", FloatOrAuto, "auto", "pulse length (auto: π time)"),
    key("sensing_signal_mhz", Float, "1", "sensed field coupling g"),
    key("sensing_control_mhz", Float, "0.7071067811865476", "control field Rabi frequency Ω_c"),
    key("sensing_detuning_mhz", Float, "50", "detuning δ of the intermediate level"),
    // Numerical gaps and robust point.
    key("floquet_max_denominator", UInt, "64", "largest denominator when rationalizing frequencies"),
    key("floquet_phase_per_step", Float, "0.2", "Floquet integrator step as phase per step"),
    key("floquet_max_sample_dt_us", Float, "0.02", "largest micromotion sample spacing"),
    key("floquet_span_us", Float, "200", "time series length for branch selection"),
    key("gap_model", Choice(&["floquet", "second-order"]), "floquet", "gap model of the robust-point search"),
    key("floquet_node_spacing_mhz", Float, "2", "Δ2 grid of the numeric gap model"),
    key("robust_lo_mhz", FloatOrAuto, "auto", "lower Δ2 search bound (auto: Δ1/4)"),
    key("robust_hi_mhz", FloatOrAuto, "auto", "upper Δ2 search bound (auto: Δ1)"),
    // Dephasing budget.
    key("setup_static_offset_mhz", Float, "0.01", "static field offset gμ_B·δB_z"),
    key("setup_relative_amplitude", Float, "0.001", "relative amplitude mismatch ε of the tones"),
    key("budget_t_max_us", FloatOrAuto, "auto", "horizon of the budget curves"),
    // Tier cross-validation.
    key("crossval_field_mhz", FloatOrAuto, "auto", "constant field offset (auto: 6σ of the magnetic noise)"),
    key("crossval_t_us", Float, "0.5", "cross-validation window"),
    // Lower-bound table.
    key("lb_t2_star_us", Float, "3", "T2* of the lower-bound table"),
    key("lb_taus_us", FloatList, "5,10,15,20,25,50,75,100,150,200", "correlation times of the lower-bound table"),
    key("lb_gamma_d_hz", Float, "285", "drive dephasing rate of the lower-bound table"),
    // Sweeps.
    key("sweep_param", Text, "", "numeric key varied by `sweep`"),
    key("sweep_values", FloatList, "", "grid of the swept key"),
];

/// A configuration problem, with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Where the offending value came from (`file:line`, `--set`, flag).
    pub origin: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.origin, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn lookup(name: &str) -> Option<&'static Key> {
    SCHEMA.iter().find(|k| k.name == name)
}

/// Value type of `name`, if it is a schema key.
pub fn kind_of(name: &str) -> Option<Kind> {
    lookup(name).map(|k| k.kind)
}

/// Validates `raw` against `kind` and returns its canonical spelling.
fn normalize(kind: Kind, raw: &str) -> Result<String, String> {
    let float = |s: &str| -> Result<String, String> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(format!("{v}")),
            _ => Err(format!("expected a finite number, got `{s}`")),
        }
    };
    match kind {
        Float => float(raw),
        FloatOrAuto if raw == "auto" => Ok("auto".into()),
        FloatOrAuto => float(raw).map_err(|e| format!("{e} (or `auto`)")),
        UInt => raw
            .parse::<u64>()
            .map(|v| v.to_string())
            .map_err(|_| format!("expected a non-negative integer, got `{raw}`")),
        Bool => match raw {
            "true" | "yes" | "1" => Ok("true".into()),
            "false" | "no" | "0" => Ok("false".into()),
            _ => Err(format!("expected true or false, got `{raw}`")),
        },
        Choice(options) if options.contains(&raw) => Ok(raw.into()),
        Choice(options) => Err(format!("expected one of {}, got `{raw}`", options.join("|"))),
        FloatList => raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(float)
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        Text if raw.chars().any(char::is_whitespace) => Err(format!("must not contain whitespace, got `{raw}`")),
        Text => Ok(raw.into()),
    }
}

/// Effective configuration: every schema key with a validated value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: SCHEMA
                .iter()
                .map(|k| (k.name, normalize(k.kind, k.default).expect("schema defaults are valid")))
                .collect(),
        }
    }
}

impl Config {
    /// Sets `name` from a textual value.
    pub fn set(&mut self, name: &str, raw: &str, origin: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            origin: origin.to_string(),
            message,
        };
        let key = lookup(name).ok_or_else(|| err(format!("unknown key `{name}`")))?;
        let value = normalize(key.kind, raw.trim()).map_err(|m| err(format!("`{name}`: {m}")))?;
        if key.name == "sweep_param" && !value.is_empty() {
            match lookup(&value) {
                Some(k) if matches!(k.kind, Float | FloatOrAuto | UInt) => {}
                _ => return Err(err(format!("`sweep_param`: `{value}` is not a numeric key"))),
            }
        }
        self.values.insert(key.name, value);
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str, origin: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError {
            origin: origin.to_string(),
            message: format!("expected key=value, got `{assignment}`"),
        })?;
        self.set(k.trim(), v, origin)
    }

    /// Parses a configuration file body on top of the defaults.
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let origin = format!("{source}:{}", i + 1);
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError {
                origin: origin.clone(),
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let k = k.trim();
            if let Some(first) = seen.insert(k.to_string(), i + 1) {
                return Err(ConfigError {
                    origin,
                    message: format!("duplicate key `{k}` (first set on line {first})"),
                });
            }
            cfg.set(k, v, &origin)?;
        }
        Ok(cfg)
    }

    fn raw(&self, name: &str) -> &str {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("`{name}` is not a schema key"))
    }

    pub fn f64(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated float")
    }

    /// `None` for `auto`.
    pub fn f64_or_auto(&self, name: &str) -> Option<f64> {
        match self.raw(name) {
            "auto" => None,
            v => Some(v.parse().expect("validated float")),
        }
    }

    pub fn u64(&self, name: &str) -> u64 {
        self.raw(name).parse().expect("validated integer")
    }

    pub fn bool(&self, name: &str) -> bool {
        self.raw(name) == "true"
    }

    pub fn text(&self, name: &str) -> &str {
        self.raw(name)
    }

    pub fn floats(&self, name: &str) -> Vec<f64> {
        let raw = self.raw(name);
        if raw.is_empty() {
            return Vec::new();
        }
        raw.split(',').map(|s| s.parse().expect("validated float list")).collect()
    }

    /// Canonical `key=value` lines, sorted by key.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Effective values in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

/// Human-readable schema listing (`key = default  # doc`).
pub fn schema_listing() -> String {
    SCHEMA
        .iter()
        .map(|k| format!("{} = {}  # {}\n", k.name, k.default, k.doc))
        .collect()
}
