use std::path::{Path, PathBuf};
use std::process::ExitCode;

use akz_core::experiment::diagnostics::{dump_trajectory, steady_state_report};
use akz_core::experiment::report::{crossover_report, sweep_report, write_crossover, write_sweep};
use akz_core::experiment::{run_size_crossover, run_sweep, Experiment, ExperimentConfig};
use akz_core::scaling::{adiabatic_prediction, predicted_akz_exponent, predicted_kz_exponent, ramp_exponent};
use akz_core::{fmt_f64, CriticalExponents, Error, Observable};
use clap::{Parser, Subcommand};
use num_rational::Rational64;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_FAILED_ROW: u8 = 3;
const EXIT_FIT_FAIL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "akz", version, about = "Dissipative quench sweeps and scaling fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep τ_q, write the table and the fit report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 4 when any fit fails.
        #[arg(long)]
        enforce: bool,
    },
    /// Fit the excess exponents at every size in `sweep.eta`.
    SizeCrossover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 4 when the trend is not monotone.
        #[arg(long)]
        enforce: bool,
    },
    /// Print the predicted power of τ_q.
    Predict {
        #[arg(long)]
        observable: String,
        /// Ramp exponent, as a decimal or `p/q`.
        #[arg(long, default_value = "1")]
        rn: String,
        #[arg(long)]
        off_critical: bool,
        /// Closed-system law instead of the open-system excess.
        #[arg(long)]
        isolated: bool,
    },
    /// Fixed point of the Markovian moment equations at frozen coupling.
    SteadyState {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        g: f64,
    },
    /// Write the open-leg moments along one ramp.
    DumpTrajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// `.csv` for commas, anything else for tabs.
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation { .. } | Error::Domain { .. } | Error::UnknownObservable(_) => EXIT_VALIDATION,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load(path: &Path) -> Result<Experiment, Failure> {
    let cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io(m) => Failure {
            code: EXIT_VALIDATION,
            message: m,
        },
        other => other.into(),
    })?;
    Ok(cfg.resolve()?)
}

fn output_dir(exp: &Experiment, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| exp.config.resolve_path(&exp.config.output.dir))
}

fn parse_rn(s: &str) -> Result<Rational64, Failure> {
    let bad = || Failure {
        code: EXIT_VALIDATION,
        message: format!("invalid `--rn`: `{s}`"),
    };
    let r = match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Rational64::new(p, q)
        }
        None => ramp_exponent(s.trim().parse().map_err(|_| bad())?)?,
    };
    if r <= Rational64::from_integer(0) {
        return Err(bad());
    }
    Ok(r)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Sweep { config, out, enforce } => {
            let exp = load(&config)?;
            let result = run_sweep(&exp)?;
            let dir = output_dir(&exp, out);
            print!("{}", sweep_report(&exp, &result));
            for p in write_sweep(&exp, &result, &dir)? {
                println!("wrote {}", p.display());
            }
            if result.failed_rows() > 0 {
                return Ok(EXIT_FAILED_ROW);
            }
            if enforce && !result.fits_pass() {
                return Ok(EXIT_FIT_FAIL);
            }
            Ok(0)
        }
        Command::SizeCrossover { config, out, enforce } => {
            let exp = load(&config)?;
            let result = run_size_crossover(&exp)?;
            let dir = output_dir(&exp, out);
            print!("{}", crossover_report(&exp, &result));
            for p in write_crossover(&exp, &result, &dir)? {
                println!("wrote {}", p.display());
            }
            if result.failed_rows() > 0 {
                return Ok(EXIT_FAILED_ROW);
            }
            if enforce && !result.trends.iter().all(|t| t.monotone) {
                return Ok(EXIT_FIT_FAIL);
            }
            Ok(0)
        }
        Command::Predict {
            observable,
            rn,
            off_critical,
            isolated,
        } => {
            let obs: Observable = observable.parse()?;
            let r_n = parse_rn(&rn)?;
            let ex = CriticalExponents::mean_field();
            let p = match (isolated, off_critical) {
                (true, true) => adiabatic_prediction(obs),
                (true, false) => predicted_kz_exponent(&ex, obs, r_n)?,
                (false, _) => predicted_akz_exponent(&ex, obs, r_n, !off_critical)?,
            };
            println!("observable = {obs}");
            println!("regime = {}", p.regime);
            println!("r_n = {}", p.r_n);
            println!("exponent = {} ({:.6})", p.exponent, p.exponent_f64());
            Ok(0)
        }
        Command::SteadyState { config, g } => {
            let exp = load(&config)?;
            let r = steady_state_report(&exp, g)?;
            println!("[{}] g = {}", exp.hash, fmt_f64(r.g));
            println!("[{}] n_th = {}", exp.hash, fmt_f64(r.n_th));
            for o in Observable::ALL {
                println!("[{}] {} = {}", exp.hash, o, fmt_f64(r.observables.get(o)));
            }
            Ok(0)
        }
        Command::DumpTrajectory {
            config,
            tau,
            samples,
            out,
        } => {
            let exp = load(&config)?;
            let t = dump_trajectory(&exp, tau, samples, &out)?;
            println!(
                "wrote {} ({} samples, {} steps)",
                out.display(),
                t.samples.len(),
                t.stats.accepted
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
