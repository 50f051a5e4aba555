//! CSV tables and text reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::fmt_f64;
use crate::scaling::ratio_to_f64;

use super::config::{BathModel, Experiment};
use super::sweep::{CrossoverResult, SweepResult};

/// `tau_q`, then `<obs>_isolated, <obs>_open, <obs>_delta` per observable.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("tau_q");
    for o in &result.observables {
        let k = o.key();
        write!(out, ",{k}_isolated,{k}_open,{k}_delta").unwrap();
    }
    out.push('\n');
    for row in &result.rows {
        out.push_str(&fmt_f64(row.tau_q));
        for t in &row.values {
            for v in [t.isolated, t.open, t.delta] {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
        }
        out.push('\n');
    }
    out
}

fn describe_bath(exp: &Experiment) -> String {
    match &exp.bath {
        BathModel::Closed => "closed".into(),
        BathModel::Markovian(b) => format!("markovian kappa={:e} n_th={:.6e}", b.kappa, b.n_th),
        BathModel::Structured(p) => format!(
            "structured kappa={:e} omega_c={:e} oscillators={}",
            p.kappa,
            p.omega_c,
            p.n_aux()
        ),
    }
}

fn header(exp: &Experiment) -> Vec<String> {
    let s = &exp.config.sweep;
    let mut model = format!("model = {:?} omega={}", exp.model.kind, exp.model.omega);
    if exp.model.eta.is_finite() {
        write!(
            model,
            " eta={} correction={:?}",
            exp.model.eta, exp.model.qrm_correction
        )
        .unwrap();
    }
    vec![
        format!("config = {}", exp.config.name),
        model,
        format!("bath = {}", describe_bath(exp)),
        format!(
            "protocol = g_final={} r_n={}",
            exp.protocol.g_final(),
            exp.protocol.r_n()
        ),
        format!(
            "sweep = [{:e}, {:e}] points_per_decade={} points={}",
            s.tau_min,
            s.tau_max,
            s.points_per_decade,
            exp.taus.len()
        ),
        format!(
            "integrator = rtol={:e} atol={:e} delta_method={:?}",
            exp.settings.rtol, exp.settings.atol, exp.method
        ),
    ]
}

fn prefixed(hash: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for l in lines {
        writeln!(out, "[{hash}] {l}").unwrap();
    }
    out
}

/// Every line starts with `[<config hash>]`.
pub fn sweep_report(exp: &Experiment, result: &SweepResult) -> String {
    let mut lines = header(exp);
    lines.push(format!("failed_rows = {}", result.failed_rows()));
    for row in result.rows.iter().filter(|r| r.failed()) {
        lines.push(format!(
            "failed tau_q = {} : {}",
            fmt_f64(row.tau_q),
            row.failure.as_deref().unwrap_or("")
        ));
    }
    for f in &result.fits {
        lines.push(String::new());
        lines.push(format!("leg = {}", f.leg));
        match &f.outcome {
            Ok(r) => lines.extend(r.to_string().lines().map(str::to_string)),
            Err(e) => {
                let p = &f.prediction;
                lines.push(format!("observable = {}", f.observable));
                lines.push(format!("regime = {}", p.regime));
                lines.push(format!("predicted = {} ({:.6})", p.exponent, ratio_to_f64(p.exponent)));
                lines.push(format!("error = {e}"));
                lines.push("verdict = FAIL".into());
            }
        }
    }
    prefixed(&result.hash, lines)
}

/// `eta, observable, b, stderr_b, predicted, deviation`.
pub fn crossover_csv(result: &CrossoverResult) -> String {
    let mut out = String::from("eta,observable,b,stderr_b,predicted,deviation\n");
    for p in &result.points {
        let predicted = result
            .trends
            .iter()
            .find(|t| t.observable == p.observable)
            .map_or(f64::NAN, |t| t.prediction.exponent_f64());
        let (b, se) = p
            .fit
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |f| (f.exponent, f.stderr_b));
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(p.eta),
            p.observable,
            fmt_f64(b),
            fmt_f64(se),
            fmt_f64(predicted),
            fmt_f64((b - predicted).abs())
        )
        .unwrap();
    }
    out
}

pub fn crossover_report(exp: &Experiment, result: &CrossoverResult) -> String {
    let mut lines = header(exp);
    lines.push(format!("eta = {:?}", exp.config.sweep.eta));
    lines.push(format!("failed_rows = {}", result.failed_rows()));
    for t in &result.trends {
        lines.push(String::new());
        lines.push(format!("observable = {}", t.observable));
        lines.push(format!(
            "predicted = {} ({:.6})",
            t.prediction.exponent,
            t.prediction.exponent_f64()
        ));
        for p in result.points.iter().filter(|p| p.observable == t.observable) {
            match &p.fit {
                Ok(f) => lines.push(format!(
                    "eta = {:e} b = {:.6} stderr_b = {:.3e}",
                    p.eta, f.exponent, f.stderr_b
                )),
                Err(e) => lines.push(format!("eta = {:e} error = {e}", p.eta)),
            }
        }
        lines.push(format!(
            "trend = {}",
            if t.monotone { "monotone" } else { "not monotone" }
        ));
    }
    prefixed(&result.hash, lines)
}

fn write(path: &Path, text: &str) -> crate::Result<()> {
    std::fs::write(path, text).map_err(|e| crate::Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `<name>.csv` and `<name>.fits.txt` into `dir`.
pub fn write_sweep(exp: &Experiment, result: &SweepResult, dir: &Path) -> crate::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", exp.config.name));
    let fits = dir.join(format!("{}.fits.txt", exp.config.name));
    write(&csv, &sweep_csv(result))?;
    write(&fits, &sweep_report(exp, result))?;
    Ok(vec![csv, fits])
}

/// Writes one table per size plus `<name>.crossover.csv` and
/// `<name>.crossover.txt`.
pub fn write_crossover(exp: &Experiment, result: &CrossoverResult, dir: &Path) -> crate::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (eta, s) in &result.sweeps {
        let p = dir.join(format!("{}.eta-{eta}.csv", exp.config.name));
        write(&p, &sweep_csv(s))?;
        paths.push(p);
    }
    let csv = dir.join(format!("{}.crossover.csv", exp.config.name));
    let txt = dir.join(format!("{}.crossover.txt", exp.config.name));
    write(&csv, &crossover_csv(result))?;
    write(&txt, &crossover_report(exp, result))?;
    paths.extend([csv, txt]);
    Ok(paths)
}
