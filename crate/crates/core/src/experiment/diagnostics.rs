//! Single-run diagnostics behind `steady-state` and `dump-trajectory`.

use std::path::Path;

use crate::aux_bath::integrate_lyapunov;
use crate::error::{Error, Result};
use crate::moments::{
    integrate, observables_from_moments, steady_state, write_trajectory, BathSpec, ObservableRecord, Sampling,
    Trajectory, TrajectorySample,
};

use super::config::{BathModel, Experiment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateReport {
    pub g: f64,
    pub n_th: f64,
    pub observables: ObservableRecord,
}

/// Fixed point of the Markovian moment equations at frozen `g`.
pub fn steady_state_report(exp: &Experiment, g: f64) -> Result<SteadyStateReport> {
    let BathModel::Markovian(bath) = exp.bath else {
        return Err(Error::validation("bath.kind", "steady-state needs a Markovian bath"));
    };
    if bath.is_closed() {
        return Err(Error::validation(
            "bath.kappa",
            "a closed mode has no attracting fixed point",
        ));
    }
    let s = steady_state(&exp.model, g, &bath)?;
    Ok(SteadyStateReport {
        g,
        n_th: bath.n_th,
        observables: observables_from_moments(&s, g, &exp.model)?,
    })
}

/// Open-leg trajectory at one `τ_q` with `samples` intervals.
pub fn trajectory(exp: &Experiment, tau_q: f64, samples: usize) -> Result<Trajectory> {
    let protocol = exp.protocol.with_tau(tau_q)?;
    let sampling = Sampling::Uniform(samples);
    match &exp.bath {
        BathModel::Closed => integrate(&protocol, &exp.model, &BathSpec::closed(), &exp.settings, sampling),
        BathModel::Markovian(b) => integrate(&protocol, &exp.model, b, &exp.settings, sampling),
        BathModel::Structured(p) => {
            let cov = integrate_lyapunov(&protocol, exp.model.omega, p, &exp.settings, sampling)?;
            let samples = cov
                .samples
                .iter()
                .map(|s| {
                    s.state.check_physical()?;
                    Ok(TrajectorySample {
                        t: s.t,
                        g: s.g,
                        state: s.state.system_moments(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory {
                samples,
                stats: cov.stats,
            })
        }
    }
}

pub fn dump_trajectory(exp: &Experiment, tau_q: f64, samples: usize, path: &Path) -> Result<Trajectory> {
    let t = trajectory(exp, tau_q, samples)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_trajectory(path, &t, &exp.model)?;
    Ok(t)
}
