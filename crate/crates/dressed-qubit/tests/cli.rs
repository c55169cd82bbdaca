use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dressed-qubit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("summary.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(": ").expect("key: value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn lookup<'a>(s: &'a [(String, String)], key: &str) -> &'a str {
    &s.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no `{key}`")).1
}

const QUICK_TLS: &[&str] = &[
    "run",
    "tls-dephasing",
    "--trajectories",
    "8",
    "--set",
    "t_final_us=20",
    "--set",
    "rabi_mhz=0",
];

#[test]
fn run_writes_curve_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = cli(QUICK_TLS, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t_us,p_mean,p_sem"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-12);

    let s = summary(dir.path());
    assert_eq!(s[0], ("tool".into(), "dressed-qubit".into()));
    assert_eq!(lookup(&s, "version"), env!("CARGO_PKG_VERSION"));
    assert_eq!(lookup(&s, "command"), "run");
    let hash = lookup(&s, "config_hash");
    assert!(hash.starts_with("sha256:") && hash.len() == 7 + 64, "{hash}");
    assert_eq!(lookup(&s, "param.experiment"), "tls-dephasing");
    assert_eq!(lookup(&s, "param.n_trajectories"), "8");
    assert_eq!(lookup(&s, "files"), "curve.csv");
    assert!(lookup(&s, "t2_us").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&cli(QUICK_TLS, a.path())), 0);
    assert_eq!(code(&cli(QUICK_TLS, b.path())), 0);
    for f in ["curve.csv", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_changes_curve_and_hash() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&cli(QUICK_TLS, a.path())), 0);
    let mut args = QUICK_TLS.to_vec();
    args.extend(["--seed", "99"]);
    assert_eq!(code(&cli(&args, b.path())), 0);
    assert_ne!(fs::read(a.path().join("curve.csv")).unwrap(), fs::read(b.path().join("curve.csv")).unwrap());
    assert_ne!(lookup(&summary(a.path()), "config_hash"), lookup(&summary(b.path()), "config_hash"));
}

#[test]
fn config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# analytic reference\nexperiment = analytic\nanalytic_model = tls\nt2_star_us = 3\ntau_us = 25\nrabi_mhz = 10\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--set", "rabi_mhz=30"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(lookup(&s, "param.rabi_mhz"), "30");
    let t2: f64 = lookup(&s, "t2_us").parse().unwrap();
    assert!((t2 - 857.6).abs() < 1.0, "{t2}");
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["run", "--set", "bogus=1"],
        vec!["run", "--set", "rabi_mhz=fast"],
        vec!["run", "--set", "no_equals_sign"],
        vec!["run", "no-such-experiment"],
        vec!["run", "tls-dephasing", "--set", "tau_us=-1"],
        vec!["run", "--tier", "warp"],
        vec!["frobnicate"],
    ] {
        let o = cli(&args, &dir.path().join("x"));
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }

    let cfg = dir.path().join("dup.cfg");
    fs::write(&cfg, "rabi_mhz = 70\nrabi_mhz = 71\n").unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap()], &dir.path().join("x"));
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dup.cfg:2") && err.contains("duplicate"), "{err}");
}

#[test]
fn io_errors_exit_4() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.cfg");
    let o = cli(&["run", "--config", missing.to_str().unwrap()], &dir.path().join("x"));
    assert_eq!(code(&o), 4);

    let file = dir.path().join("plain");
    fs::write(&file, "").unwrap();
    let o = cli(&["stark"], &file.join("sub"));
    assert_eq!(code(&o), 4);
}

#[test]
fn missing_crossing_exits_3_when_required() {
    let dir = TempDir::new().unwrap();
    let o = cli(
        &["run", "tls-dephasing", "--trajectories", "2", "--set", "t_final_us=1", "--set", "require_t2_crossing=true"],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    // Artifacts are still written.
    assert!(dir.path().join("curve.csv").exists());
}

#[test]
fn sweep_rows_follow_the_value_order() {
    let dir = TempDir::new().unwrap();
    let o = cli(
        &[
            "sweep",
            "--set",
            "experiment=analytic",
            "--set",
            "analytic_model=tls",
            "--set",
            "t2_star_us=3",
            "--set",
            "tau_us=25",
            "--set",
            "sweep_param=rabi_mhz",
            "--set",
            "sweep_values=50,10,30",
            "--emit-plot-script",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "rabi_mhz,t2_us,t2_kind,error");
    let x: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(x, ["50", "10", "30"]);
    let plot = fs::read_to_string(dir.path().join("plot.py")).unwrap();
    assert!(plot.contains("\"sweep.csv\""));
    assert_eq!(lookup(&summary(dir.path()), "rows"), "3");
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let o = cli(
        &["sweep", "--set", "experiment=analytic", "--set", "sweep_param=rabi_mhz", "--set", "sweep_values="],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(lookup(&summary(dir.path()), "rows"), "0");
}

#[test]
fn stark_subcommand_reports_gaps() {
    let dir = TempDir::new().unwrap();
    let o = cli(&["stark"], dir.path());
    assert_eq!(code(&o), 0);
    let s = summary(dir.path());
    assert_eq!(lookup(&s, "command"), "stark");
    let e_bd: f64 = lookup(&s, "second_order_e_bd_mhz").parse().unwrap();
    assert!((e_bd - 16.68).abs() < 0.01);
    assert_eq!(lookup(&s, "files"), "-");
}

#[test]
fn budget_subcommand_writes_curves() {
    let dir = TempDir::new().unwrap();
    let o = cli(&["budget", "--set", "samples=50"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    assert!(lookup(&s, "gamma_d_hz").parse::<f64>().unwrap() > 0.0);
    let csv = fs::read_to_string(dir.path().join("budget.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t_us,"));
    assert_eq!(csv.lines().count(), 51);
}
