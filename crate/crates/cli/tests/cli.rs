use std::path::Path;
use std::process::{Command, Output};

fn akz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_akz"))
        .args(args)
        .env_remove("AKZ_BATH__KAPPA")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
name = "small"
[model]
kind = "thermodynamic"
[bath]
kind = "markovian"
kappa = 1e-5
[protocol]
g_final = 0.75
[sweep]
tau_min = 100.0
tau_max = 300.0
points_per_decade = 10
[output]
dir = "results"
observables = ["e_r", "n"]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("c.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn predict_prints_rational_and_decimal() {
    let o = akz(&["predict", "--observable", "e_r", "--rn", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("exponent = 2/3 (0.666667)"));
    let o = akz(&["predict", "--observable", "n", "--rn", "2"]);
    assert!(stdout(&o).contains("exponent = 3/2 (1.500000)"));
    let o = akz(&["predict", "--observable", "dx", "--off-critical"]);
    let s = stdout(&o);
    assert!(s.contains("exponent = 1 (1.000000)") && s.contains("akz-linear"));
    let o = akz(&["predict", "--observable", "e_r", "--rn", "1/2"]);
    assert!(stdout(&o).contains("exponent = 4/5"));
    let o = akz(&["predict", "--observable", "e_r", "--isolated"]);
    assert!(stdout(&o).contains("exponent = -1/3"));
}

#[test]
fn bad_inputs_exit_with_validation_status() {
    assert_eq!(akz(&["predict", "--observable", "spin"]).status.code(), Some(2));
    assert_eq!(
        akz(&["predict", "--observable", "n", "--rn", "-1"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), &SMALL.replace("tau_max = 300.0", "tau_max = 100.0"));
    let o = akz(&["sweep", "--config", &empty]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid `sweep`"));
    assert_eq!(
        akz(&["sweep", "--config", "/nonexistent/c.toml"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = akz(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/small.csv")).unwrap();
    assert!(csv.starts_with("tau_q,e_r_isolated,e_r_open,e_r_delta,n_isolated,n_open,n_delta\n"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let report = std::fs::read_to_string(dir.path().join("results/small.fits.txt")).unwrap();
    let hash = report.split(']').next().unwrap().trim_start_matches('[').to_string();
    assert_eq!(hash.len(), 16);
    assert!(report.lines().all(|l| l.starts_with(&format!("[{hash}]"))));
    assert!(stdout(&o).contains("wrote"));

    let out = dir.path().join("elsewhere");
    let o = akz(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(out.join("small.csv")).unwrap(), csv);
}

#[test]
fn enforce_turns_failed_fits_into_status_four() {
    let dir = tempfile::tempdir().unwrap();
    // a short window far from the asymptotic regime, with an impossible tolerance
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("[output]", "[fit]\ntolerance = 1e-9\n[output]"),
    );
    assert_eq!(akz(&["sweep", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(akz(&["sweep", "--config", &cfg, "--enforce"]).status.code(), Some(4));
}

#[test]
fn failed_rows_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[integrator]\nmax_steps = 700\n"));
    let o = akz(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let s = stdout(&o);
    assert!(s.contains("failed tau_q"));
    let csv = std::fs::read_to_string(dir.path().join("results/small.csv")).unwrap();
    assert!(csv.contains("NaN"));
    assert!(csv.lines().skip(1).any(|l| !l.contains("NaN")));
}

#[test]
fn environment_overrides_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_akz"))
        .args(["sweep", "--config", &cfg])
        .env("AKZ_OUTPUT__DIR", "overridden")
        .env("AKZ_BATH__KAPPA", "2e-5")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("kappa=2e-5"));
    assert!(dir.path().join("overridden/small.csv").exists());
}

#[test]
fn diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("kappa = 1e-5", "kappa = 0.1\ntemperature = 2.0"),
    );
    let o = akz(&["steady-state", "--config", &cfg]);
    assert!(o.status.success());
    let s = stdout(&o);
    let grab = |key: &str| -> f64 {
        s.lines()
            .find_map(|l| l.split("] ").nth(1).and_then(|r| r.strip_prefix(&format!("{key} = "))))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((grab("n") - grab("n_th")).abs() < 1e-12);

    let out = dir.path().join("traj.tsv");
    let o = akz(&[
        "dump-trajectory",
        "--config",
        &cfg,
        "--tau",
        "50",
        "--samples",
        "25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 27);
    assert!(text.starts_with("t\tg\tsigma\t"));
}
