//! Sweeps over `τ_q` and system size.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::aux_bath::integrate_lyapunov_excess;
use crate::error::{Error, Result};
use crate::model::{CriticalExponents, ModelKind, ModelSpec, Observable, QrmCorrection};
use crate::moments::{closed_leg, integrate_excess, ExcessMoments, MomentState};
use crate::ode::IntegratorSettings;
use crate::protocol::QuenchProtocol;
use crate::scaling::{
    adiabatic_prediction, fit_power_law, predicted_akz_exponent, predicted_kz_exponent, ramp_exponent, FitReport,
    PowerLawFit, ScalingPrediction,
};

use super::config::{BathModel, Experiment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub isolated: f64,
    pub open: f64,
    pub delta: f64,
}

impl Triple {
    pub const FAILED: Triple = Triple {
        isolated: f64::NAN,
        open: f64::NAN,
        delta: f64::NAN,
    };
}

/// One `τ_q`; `values` follows the experiment's observable order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau_q: f64,
    pub values: Vec<Triple>,
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: ModelKind,
    correction: QrmCorrection,
    bits: [u64; 7],
    max_steps: usize,
}

impl CacheKey {
    fn new(model: &ModelSpec, protocol: &QuenchProtocol, s: &IntegratorSettings) -> Self {
        Self {
            kind: model.kind,
            correction: model.qrm_correction,
            bits: [
                model.eta.to_bits(),
                model.omega.to_bits(),
                protocol.g_final().to_bits(),
                protocol.tau_q().to_bits(),
                protocol.r_n().to_bits(),
                s.rtol.to_bits(),
                s.atol.to_bits(),
            ],
            max_steps: s.max_steps,
        }
    }
}

/// Final closed-leg states, shared between sweeps that differ only in the
/// bath.
#[derive(Debug, Default)]
pub struct IsolatedCache {
    states: Mutex<HashMap<CacheKey, MomentState>>,
}

impl IsolatedCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.states.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn closed_state(
        &self,
        model: &ModelSpec,
        protocol: &QuenchProtocol,
        settings: &IntegratorSettings,
    ) -> Result<MomentState> {
        let key = CacheKey::new(model, protocol, settings);
        if let Some(s) = self.states.lock().expect("cache lock").get(&key) {
            return Ok(*s);
        }
        let s = closed_leg(protocol, model, settings)?;
        self.states.lock().expect("cache lock").insert(key, s);
        Ok(s)
    }
}

/// Isolated, open and excess values at one `τ_q`.
pub fn compute_row(exp: &Experiment, tau_q: f64, cache: &IsolatedCache) -> Result<Vec<Triple>> {
    let protocol = exp.protocol.with_tau(tau_q)?;
    let closed = cache.closed_state(&exp.model, &protocol, &exp.settings)?;
    let delta = match &exp.bath {
        BathModel::Closed => [0.0; 3],
        BathModel::Markovian(b) => integrate_excess(&protocol, &exp.model, b, &exp.settings, exp.method)?.delta,
        BathModel::Structured(p) => {
            integrate_lyapunov_excess(&protocol, exp.model.omega, p, &exp.settings, exp.method)?.delta
        }
    };
    let mode = exp.model.mode(protocol.g_final())?;
    let split = ExcessMoments { closed, delta }.split(&mode)?;
    Ok(exp
        .observables
        .iter()
        .map(|&o| Triple {
            isolated: split.closed.get(o),
            open: split.open.get(o),
            delta: split.delta.get(o),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    Isolated,
    Delta,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::Isolated => "isolated",
            Leg::Delta => "delta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitEntry {
    pub leg: Leg,
    pub observable: Observable,
    pub prediction: ScalingPrediction,
    pub outcome: std::result::Result<FitReport, Error>,
}

impl FitEntry {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.passed())
    }

    pub fn exponent(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.fit.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub hash: String,
    pub observables: Vec<Observable>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitEntry>,
}

impl SweepResult {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn fits_pass(&self) -> bool {
        self.fits.iter().all(FitEntry::passed)
    }

    pub fn fit(&self, leg: Leg, obs: Observable) -> Option<&FitEntry> {
        self.fits.iter().find(|f| f.leg == leg && f.observable == obs)
    }

    /// `(τ_q, value)` pairs of successful rows.
    pub fn series(&self, leg: Leg, obs: Observable) -> Vec<(f64, f64)> {
        let Some(k) = self.observables.iter().position(|&o| o == obs) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| !r.failed())
            .map(|r| {
                let t = r.values[k];
                (r.tau_q, if leg == Leg::Isolated { t.isolated } else { t.delta })
            })
            .collect()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(format!("worker pool: {e}")))
}

pub fn run_sweep(exp: &Experiment) -> Result<SweepResult> {
    run_sweep_with_cache(exp, &IsolatedCache::new())
}

pub fn run_sweep_with_cache(exp: &Experiment, cache: &IsolatedCache) -> Result<SweepResult> {
    let rows = pool(exp.config.run.workers)?.install(|| compute_rows(exp, cache));
    let fits = if exp.config.fit.enabled {
        fit_sweep(exp, &rows)?
    } else {
        Vec::new()
    };
    Ok(SweepResult {
        hash: exp.hash.clone(),
        observables: exp.observables.clone(),
        rows,
        fits,
    })
}

fn compute_rows(exp: &Experiment, cache: &IsolatedCache) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = exp
        .taus
        .par_iter()
        .map(|&tau_q| match compute_row(exp, tau_q, cache) {
            Ok(values) => SweepRow {
                tau_q,
                values,
                failure: None,
            },
            Err(e) => SweepRow {
                tau_q,
                values: vec![Triple::FAILED; exp.observables.len()],
                failure: Some(e.to_string()),
            },
        })
        .collect();
    rows.sort_by(|a, b| a.tau_q.total_cmp(&b.tau_q));
    rows
}

/// Predictions that apply to this experiment, in report order.
pub fn applicable_predictions(exp: &Experiment) -> Result<Vec<(Leg, ScalingPrediction)>> {
    let ex = CriticalExponents::mean_field();
    let r_n = ramp_exponent(exp.protocol.r_n())?;
    let critical = exp.at_critical();
    let mut out = Vec::new();
    if exp.config.run.run_isolated {
        for &o in &exp.observables {
            if critical {
                out.push((Leg::Isolated, predicted_kz_exponent(&ex, o, r_n)?));
            } else if o == Observable::ResidualEnergy {
                // only the excitation energy vanishes adiabatically
                out.push((Leg::Isolated, adiabatic_prediction(o)));
            }
        }
    }
    if !exp.bath.is_closed() {
        for &o in &exp.observables {
            out.push((Leg::Delta, predicted_akz_exponent(&ex, o, r_n, critical)?));
        }
    }
    Ok(out)
}

fn fit_sweep(exp: &Experiment, rows: &[SweepRow]) -> Result<Vec<FitEntry>> {
    let result = SweepResult {
        hash: String::new(),
        observables: exp.observables.clone(),
        rows: rows.to_vec(),
        fits: Vec::new(),
    };
    Ok(applicable_predictions(exp)?
        .into_iter()
        .map(|(leg, prediction)| {
            let pts = result.series(leg, prediction.observable);
            let outcome = fit_power_law(&pts, Some(exp.window))
                .map(|fit| FitReport::new(fit, prediction, exp.config.fit.tolerance));
            FitEntry {
                leg,
                observable: prediction.observable,
                prediction,
                outcome,
            }
        })
        .collect())
}

/// Allowed step against the overall direction of a crossover.
pub const TREND_SLACK: f64 = 5e-3;

/// Whether `b` runs monotonically (up to [`TREND_SLACK`]) and ends closer to
/// `target` than it starts.
pub fn monotone_toward(b: &[f64], target: f64) -> bool {
    let (Some(&first), Some(&last)) = (b.first(), b.last()) else {
        return false;
    };
    if b.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let dir = (last - first).signum();
    b.windows(2).all(|w| (w[1] - w[0]) * dir >= -TREND_SLACK) && (last - target).abs() <= (first - target).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverPoint {
    pub eta: f64,
    pub observable: Observable,
    pub fit: std::result::Result<PowerLawFit, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverTrend {
    pub observable: Observable,
    pub prediction: ScalingPrediction,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverResult {
    pub hash: String,
    pub points: Vec<CrossoverPoint>,
    pub trends: Vec<CrossoverTrend>,
    pub sweeps: Vec<(f64, SweepResult)>,
}

impl CrossoverResult {
    pub fn exponent(&self, eta: f64, obs: Observable) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.eta == eta && p.observable == obs)
            .and_then(|p| p.fit.as_ref().ok())
            .map(|f| f.exponent)
    }

    pub fn failed_rows(&self) -> usize {
        self.sweeps.iter().map(|(_, s)| s.failed_rows()).sum()
    }
}

/// `b(η)` of every excess observable over `sweep.eta`.
pub fn run_size_crossover(exp: &Experiment) -> Result<CrossoverResult> {
    if exp.model.kind == ModelKind::ThermodynamicLimit {
        return Err(Error::validation("model.kind", "size-crossover needs `qrm` or `lmg`"));
    }
    let etas = &exp.config.sweep.eta;
    if etas.len() < 3 {
        return Err(Error::validation(
            "sweep.eta",
            format!("size-crossover needs at least 3 sizes, got {}", etas.len()),
        ));
    }
    if !etas.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::validation("sweep.eta", "sizes must be strictly increasing"));
    }
    if exp.bath.is_closed() {
        return Err(Error::validation("bath", "size-crossover fits the open-system excess"));
    }
    if !exp.config.fit.enabled {
        return Err(Error::validation("fit.enabled", "size-crossover always fits"));
    }
    let cache = IsolatedCache::new();
    let mut sweeps = Vec::with_capacity(etas.len());
    let mut points = Vec::new();
    for &eta in etas {
        let sized = exp.with_eta(eta)?;
        let mut s = run_sweep_with_cache(&sized, &cache)?;
        s.fits.retain(|f| f.leg == Leg::Delta);
        for &o in &exp.observables {
            points.push(CrossoverPoint {
                eta,
                observable: o,
                fit: fit_power_law(&s.series(Leg::Delta, o), Some(exp.window)),
            });
        }
        sweeps.push((eta, s));
    }
    let ex = CriticalExponents::mean_field();
    let r_n = ramp_exponent(exp.protocol.r_n())?;
    let trends = exp
        .observables
        .iter()
        .map(|&o| {
            let prediction = predicted_akz_exponent(&ex, o, r_n, exp.at_critical())?;
            let b: Vec<f64> = points
                .iter()
                .filter(|p| p.observable == o)
                .map(|p| p.fit.as_ref().map_or(f64::NAN, |f| f.exponent))
                .collect();
            Ok(CrossoverTrend {
                observable: o,
                monotone: monotone_toward(&b, prediction.exponent_f64()),
                prediction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossoverResult {
        hash: exp.hash.clone(),
        points,
        trends,
        sweeps,
    })
}
