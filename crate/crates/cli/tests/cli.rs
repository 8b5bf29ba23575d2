use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forch_cli::run::{header, scenario_from_header};
use forch_cli::{resolve, Overrides, Scenario};
use proptest::prelude::*;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_forchpi"));
    c.env_remove("FORCHPI_OUT_DIR");
    c
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn body(csv: &str) -> &str {
    let skip: usize = csv
        .split_inclusive('\n')
        .take_while(|l| l.starts_with('#'))
        .map(str::len)
        .sum();
    &csv[skip..]
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    body(csv)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        "name = \"x\"\nmodel = \"liquid\"\n[geometry\n",
        "name = \"x\"\nmodel = \"liquid\"\ncolour = 3\n[geometry]\nkind = \"radial\"\nn = 8\nr_inner = 1.0\nr_outer = 2.0\n",
        "name = \"x\"\nmodel = \"liquid\"\n[geometry]\nkind = \"radial\"\nn = 8\nr_inner = 2.0\nr_outer = 1.0\n[program]\nregime = \"total_flux\"\nq_s = 1.0\nq = \"1\"\n",
        "name = \"x\"\nmodel = \"liquid\"\n[geometry]\nkind = \"radial\"\nn = 8\nr_inner = 1.0\nr_outer = 2.0\n[program]\nregime = \"total_flux\"\nq_s = 1.0\nq = \"1 +* t\"\n",
        "name = \"x\"\nmodel = \"gas\"\n[geometry]\nkind = \"radial\"\nn = 8\nr_inner = 1.0\nr_outer = 2.0\n[kernel]\nalpha = 1.0\nbeta = 0.0\n[gas]\nb_reserve = 10.0\na_rate = 1.0\n[numerics]\ndt = 0.1\nt_end = 10.0\n",
    ];
    let cmds = ["pss", "pss", "pss", "transient", "gas"];
    for (text, cmd) in cases.iter().zip(cmds) {
        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, text).unwrap();
        let o = run(cmd, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
        let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "config");
        assert!(!out.exists(), "partial outputs for {text}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("pss", &dir.path().join("absent.toml"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn wrong_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("transient", &scenario_path("fig1"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pss_matches_the_radial_darcy_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("pss", &scenario_path("radial_darcy"), dir.path(), &[]);
    assert!(o.status.success());
    let (ri, re) = (1.0f64, 2.0f64);
    let a = 1.0 / (std::f64::consts::PI * (re * re - ri * ri));
    // mean of a (re²/2 ln(r/ri) − (r² − ri²)/4) over the annulus
    let i1 = re * re / 2.0 * (re / ri).ln() - (re * re - ri * ri) / 4.0;
    let i2 = (re * re - ri * ri).powi(2) / 4.0;
    let mean = 2.0 * a * (re * re / 2.0 * i1 - i2 / 4.0) / (re * re - ri * ri);
    let oracle = 1.0 / mean;
    let j = json(&o)["j_pss"].as_f64().unwrap();
    assert!((j - oracle).abs() / oracle < 1e-2, "{j} vs {oracle}");

    let csv = std::fs::read_to_string(dir.path().join("radial_darcy_pss.csv")).unwrap();
    assert_eq!(rows(&csv).len(), 513);
    let report = std::fs::read_to_string(dir.path().join("radial_darcy_pss.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["j_pss"].as_f64(), Some(j));
}

#[test]
fn fig1_pi_has_the_blow_up_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("gas", &scenario_path("fig1"), dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig1_gas.csv")).unwrap();
    assert!(body(&csv).starts_with("t,Q,p2_drawdown,J,J_p0,max_abs_p_minus_p0\n"));
    let t_crit = 2000.0;
    let table = rows(&csv);
    let parse = |s: &String| s.parse::<f64>().unwrap();
    for r in &table {
        let (t, ratio) = (parse(&r[0]), parse(&r[3]) / parse(&r[4]));
        if t <= 0.8 * t_crit {
            assert!((0.95..=1.05).contains(&ratio), "t = {t}: {ratio}");
        }
    }
    let last = table.last().unwrap();
    assert!(parse(&last[0]) >= 0.99 * t_crit);
    assert!(parse(&last[3]) / parse(&last[4]) >= 1.5);
}

#[test]
fn repeated_runs_produce_identical_bodies() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (cmd, name, file) in [
        ("transient", "transient", "transient_transient.csv"),
        ("gas-sweep", "sweep", "sweep_gas-sweep.csv"),
        ("diagnose", "diagnose", "diagnose_diagnose.csv"),
    ] {
        let oa = run(cmd, &scenario_path(name), a.path(), &["--threads", "3"]);
        let ob = run(cmd, &scenario_path(name), b.path(), &[]);
        assert!(oa.status.success() && ob.status.success());
        let ca = std::fs::read_to_string(a.path().join(file)).unwrap();
        let cb = std::fs::read_to_string(b.path().join(file)).unwrap();
        assert!(!body(&ca).is_empty());
        assert_eq!(body(&ca), body(&cb), "{cmd}");
    }
}

#[test]
fn csv_header_reparses_to_the_resolved_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("gas-identity", &scenario_path("identity"), dir.path(), &["--stride", "3"]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("identity_gas-identity.csv")).unwrap();
    let parsed = scenario_from_header(&csv).unwrap();
    let text = std::fs::read_to_string(scenario_path("identity")).unwrap();
    let ov = Overrides {
        out: Some(dir.path().to_path_buf()),
        stride: Some(3),
    };
    assert_eq!(parsed, resolve(&text, &ov).unwrap());
    assert_eq!(parsed.output.stride, 3);
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert!(r[0][3].parse::<f64>().unwrap() <= 5e-2);
}

#[test]
fn shipped_scenarios_round_trip() {
    for name in ["radial_darcy", "fig1", "transient", "sweep", "identity", "diagnose"] {
        let text = std::fs::read_to_string(scenario_path(name)).unwrap();
        let sc = resolve(&text, &Overrides::default()).unwrap();
        assert_eq!(sc.output.dir.as_deref(), Some("out"));
        assert_eq!(scenario_from_header(&header(&sc)).unwrap(), sc, "{name}");
    }
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");
    let cfg = scenario_path("radial_darcy");
    let o = bin()
        .args(["pss", "--config"])
        .arg(&cfg)
        .env("FORCHPI_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("radial_darcy_pss.csv").exists());
    let o = bin()
        .args(["pss", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .env("FORCHPI_OUT_DIR", dir.path().join("unused"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("radial_darcy_pss.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn stride_thins_rows_and_keeps_the_last() {
    let dir = tempfile::tempdir().unwrap();
    let full = run("transient", &scenario_path("transient"), dir.path(), &[]);
    assert!(full.status.success());
    let all = rows(&std::fs::read_to_string(dir.path().join("transient_transient.csv")).unwrap());
    let thin = run("transient", &scenario_path("transient"), dir.path(), &["--stride", "7"]);
    assert!(thin.status.success());
    let some = rows(&std::fs::read_to_string(dir.path().join("transient_transient.csv")).unwrap());
    assert_eq!(some.len(), all.len().div_ceil(7));
    assert_eq!(some.last(), all.last());
    assert_eq!(some[0], all[6]);
}

#[test]
fn sweep_table_ends_with_the_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("gas-sweep", &scenario_path("sweep"), dir.path(), &[]);
    assert!(o.status.success());
    let r = rows(&std::fs::read_to_string(dir.path().join("sweep_gas-sweep.csv")).unwrap());
    assert_eq!(r.len(), 6);
    assert_eq!(r[5][0], "slope");
    let slope: f64 = r[5][1].parse().unwrap();
    assert!((slope + 2.0).abs() <= 0.3, "{slope}");
    assert_eq!(json(&o)["slope"].as_f64(), Some(slope));
}

fn arb_scenario() -> impl Strategy<Value = String> {
    (
        "[a-z][a-z0-9_]{0,8}",
        1e-3f64..1e3,
        1.0f64..1e4,
        2usize..600,
        prop::option::of(1e-12f64..1e-3),
        prop::bool::ANY,
        prop::collection::vec(0.0f64..5.0, 1..4),
    )
        .prop_map(|(name, ri, span, n, tol, dirichlet, coeffs)| {
            let exps: Vec<String> = (0..coeffs.len()).map(|k| format!("{}.0", k)).collect();
            let coeffs: Vec<String> = coeffs.iter().map(|c| format!("{c:?}")).collect();
            let program = if dirichlet {
                "regime = \"dirichlet\"\ngamma = \"-{A}*t + exp(-t/{tau})\"".to_string()
            } else {
                "regime = \"total_flux\"\nq = \"1 + sin(t)^2\"".to_string()
            };
            let tol = tol.map(|t| format!("tol = {t:?}\n")).unwrap_or_default();
            format!(
                "name = \"{name}\"\nmodel = \"liquid\"\n[geometry]\nkind = \"radial\"\n\
                 r_inner = {ri:?}\nr_outer = {:?}\nn = {n}\n[kernel]\ncoeffs = [{}]\n\
                 exponents = [{}]\n[program]\n{program}\nq_s = 1.5\n\
                 phi = \"0.1*cos(s)\"\n[numerics]\ndt = 0.1\n{tol}",
                ri + span,
                coeffs.join(", "),
                exps.join(", "),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn header_round_trip(text in arb_scenario(), stride in 1usize..50) {
        let ov = Overrides { out: Some(PathBuf::from("some/dir")), stride: Some(stride) };
        let sc: Scenario = resolve(&text, &ov).unwrap();
        prop_assert_eq!(scenario_from_header(&header(&sc)).unwrap(), sc);
    }
}
