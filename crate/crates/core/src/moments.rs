//! Second-moment dynamics of a single driven, damped bosonic mode.
//!
//! The state is carried as `(σ, Re σ10, Im σ10)` with `σ01 = σ10*`, where
//! `⟨a†a⟩ = σ − ½` and `⟨x²⟩ = 2σ − σ01 − σ10` for `x = a + a†`. First
//! moments stay zero for every protocol started from the vacuum.
//!
//! Excess quantities `δA = ⟨A⟩_open − ⟨A⟩_closed` are obtained either by
//! subtracting two independent runs or, by default, by integrating the
//! closed state together with the rescaled difference `(s_open − s_closed)/κ`.
//! The difference obeys the open linear flow forced only by the dissipative
//! part, so it carries full relative precision even when `δA` is many orders
//! of magnitude below `⟨A⟩`.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Observable, QuadraticMode};
use crate::ode::{Dop853, IntegratorSettings, OdeSystem, StepStats};
use crate::protocol::QuenchProtocol;

/// Markovian thermal bath acting through jump operators `a` and `a†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub kappa: f64,
    pub n_th: f64,
}

/// `Γ_a = κ(N+1)/2`, `Γ_a† = κN/2`, `Γ_± = Γ_a† ± Γ_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathRates {
    pub gamma_a: f64,
    pub gamma_adag: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
}

impl BathSpec {
    pub fn closed() -> Self {
        Self { kappa: 0.0, n_th: 0.0 }
    }

    pub fn new(kappa: f64, n_th: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain("kappa", kappa, "finite and >= 0"));
        }
        if !(n_th >= 0.0 && n_th.is_finite()) {
            return Err(Error::domain("n_th", n_th, "finite and >= 0"));
        }
        Ok(Self { kappa, n_th })
    }

    pub fn from_temperature(kappa: f64, temperature: f64, omega: f64) -> Result<Self> {
        Self::new(kappa, thermal_occupation(temperature, omega)?)
    }

    pub fn rates(&self) -> BathRates {
        let gamma_a = self.kappa * (self.n_th + 1.0) / 2.0;
        let gamma_adag = self.kappa * self.n_th / 2.0;
        BathRates {
            gamma_a,
            gamma_adag,
            gamma_minus: gamma_adag - gamma_a,
            gamma_plus: gamma_adag + gamma_a,
        }
    }

    /// Rates per unit `κ`; zero bath gives zero.
    fn unit_rates(&self) -> (f64, f64) {
        (-0.5, self.n_th + 0.5)
    }

    pub fn is_closed(&self) -> bool {
        self.kappa == 0.0
    }
}

/// Bose-Einstein occupation `(e^{ω/T} − 1)^{-1}`, exactly zero at `T = 0`.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if !(temperature >= 0.0) {
        return Err(Error::domain("temperature", temperature, ">= 0"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    sigma: f64,
    sigma10: Complex64,
}

impl MomentState {
    pub fn vacuum() -> Self {
        Self {
            sigma: 0.5,
            sigma10: Complex64::new(0.0, 0.0),
        }
    }

    pub fn new(sigma: f64, sigma10: Complex64) -> Self {
        Self { sigma, sigma10 }
    }

    /// From `⟨x²⟩`, `⟨p²⟩` and the symmetrised `⟨xp + px⟩/2`.
    pub fn from_quadratures(x2: f64, p2: f64, xp_sym: f64) -> Self {
        Self {
            sigma: (x2 + p2) / 4.0,
            sigma10: Complex64::new((p2 - x2) / 4.0, xp_sym / 2.0),
        }
    }

    fn from_array(y: &[f64]) -> Self {
        Self {
            sigma: y[0],
            sigma10: Complex64::new(y[1], y[2]),
        }
    }

    fn to_array(self) -> [f64; 3] {
        [self.sigma, self.sigma10.re, self.sigma10.im]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma10(&self) -> Complex64 {
        self.sigma10
    }

    pub fn sigma01(&self) -> Complex64 {
        self.sigma10.conj()
    }

    pub fn occupation(&self) -> f64 {
        self.sigma - 0.5
    }

    pub fn x_second_moment(&self) -> f64 {
        2.0 * self.sigma - 2.0 * self.sigma10.re
    }

    pub fn p_second_moment(&self) -> f64 {
        2.0 * self.sigma + 2.0 * self.sigma10.re
    }

    /// `σ² − σ01 σ10`, equal to ¼ for pure Gaussian states.
    pub fn purity_invariant(&self) -> f64 {
        self.sigma * self.sigma - self.sigma10.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRecord {
    pub n: f64,
    pub dx: f64,
    pub dp: f64,
    pub energy: f64,
    pub residual_energy: f64,
}

impl ObservableRecord {
    pub fn get(&self, obs: Observable) -> f64 {
        match obs {
            Observable::Occupation => self.n,
            Observable::DeltaX => self.dx,
            Observable::DeltaP => self.dp,
            Observable::ResidualEnergy => self.residual_energy,
        }
    }
}

const RADICAND_TOL: f64 = 1e-10;

fn checked_sqrt(what: &str, v: f64) -> Result<f64> {
    if v < -RADICAND_TOL || v.is_nan() {
        return Err(Error::Physicality(format!("{what} = {v:e} < 0")));
    }
    Ok(v.max(0.0).sqrt())
}

/// `n`, `Δx`, `Δp`, `E` and `E_r` of a Gaussian state at coupling `g`.
pub fn observables_from_moments(state: &MomentState, g: f64, model: &ModelSpec) -> Result<ObservableRecord> {
    let mode = model.mode(g)?;
    observables_with_mode(state, &mode)
}

pub(crate) fn observables_with_mode(state: &MomentState, mode: &QuadraticMode) -> Result<ObservableRecord> {
    let dx = checked_sqrt("⟨x²⟩", state.x_second_moment())?;
    let dp = checked_sqrt("⟨p²⟩", state.p_second_moment())?;
    let energy = mode.energy(state);
    Ok(ObservableRecord {
        n: state.occupation(),
        dx,
        dp,
        energy,
        residual_energy: energy - mode.ground_state_energy(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDerivative {
    pub sigma: f64,
    pub sigma10: Complex64,
}

/// Time derivative of the moments at time `t` of the ramp.
pub fn moment_rhs(
    state: &MomentState,
    t: f64,
    protocol: &QuenchProtocol,
    model: &ModelSpec,
    bath: &BathSpec,
) -> Result<MomentDerivative> {
    let g = protocol.coupling_at(t)?;
    let c = model.mode(g)?.moment_coefficients();
    let r = bath.rates();
    let mut dy = [0.0; 3];
    closed_flow(&state.to_array(), c.drive, c.rotation, c.pump, r.gamma_minus, &mut dy);
    dy[0] += r.gamma_plus;
    Ok(MomentDerivative {
        sigma: dy[0],
        sigma10: Complex64::new(dy[1], dy[2]),
    })
}

/// Homogeneous part of the flow with amplitude damping `gm = Γ_−`.
#[inline]
fn closed_flow(y: &[f64], drive: f64, rotation: f64, pump: f64, gm: f64, dy: &mut [f64]) {
    let (s, x, p) = (y[0], y[1], y[2]);
    // i·drive·(σ01 − σ10) = 2·drive·Im σ10
    dy[0] = 2.0 * gm * s + 2.0 * drive * p;
    dy[1] = 2.0 * gm * x - rotation * p;
    dy[2] = rotation * x + 2.0 * gm * p + pump * s;
}

struct SingleLeg<'a> {
    protocol: &'a QuenchProtocol,
    model: &'a ModelSpec,
    bath: BathRates,
}

impl OdeSystem for SingleLeg<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let g = self.protocol.coupling_unchecked(t);
        let c = self.model.mode_unchecked(g).moment_coefficients();
        closed_flow(y, c.drive, c.rotation, c.pump, self.bath.gamma_minus, dy);
        dy[0] += self.bath.gamma_plus;
    }
}

/// Closed leg in `y[0..3]` and `(open − closed)/κ` in `y[3..6]`.
struct ExcessLegs<'a> {
    protocol: &'a QuenchProtocol,
    model: &'a ModelSpec,
    kappa: f64,
    unit_minus: f64,
    unit_plus: f64,
}

impl OdeSystem for ExcessLegs<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let g = self.protocol.coupling_unchecked(t);
        let c = self.model.mode_unchecked(g).moment_coefficients();
        let (closed, diff) = y.split_at(3);
        let (d_closed, d_diff) = dy.split_at_mut(3);
        closed_flow(closed, c.drive, c.rotation, c.pump, 0.0, d_closed);
        closed_flow(diff, c.drive, c.rotation, c.pump, self.kappa * self.unit_minus, d_diff);
        d_diff[0] += 2.0 * self.unit_minus * closed[0] + self.unit_plus;
        d_diff[1] += 2.0 * self.unit_minus * closed[1];
        d_diff[2] += 2.0 * self.unit_minus * closed[2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    FinalOnly,
    /// `n + 1` equally spaced samples including both endpoints.
    Uniform(usize),
}

impl Sampling {
    pub(crate) fn times(&self, tau_q: f64) -> Vec<f64> {
        match *self {
            Sampling::FinalOnly => vec![0.0, tau_q],
            Sampling::Uniform(n) => {
                let n = n.max(1);
                (0..=n)
                    .map(|i| if i == n { tau_q } else { tau_q * i as f64 / n as f64 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub g: f64,
    pub state: MomentState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &MomentState {
        &self.samples.last().expect("trajectory has samples").state
    }
}

/// Propagates the vacuum over the whole ramp.
pub fn integrate(
    protocol: &QuenchProtocol,
    model: &ModelSpec,
    bath: &BathSpec,
    settings: &IntegratorSettings,
    sampling: Sampling,
) -> Result<Trajectory> {
    model.validate()?;
    settings.validate()?;
    let sys = SingleLeg {
        protocol,
        model,
        bath: bath.rates(),
    };
    let mut solver = Dop853::new(*settings, 3);
    let mut y = MomentState::vacuum().to_array();
    let times = sampling.times(protocol.tau_q());
    let mut samples = Vec::with_capacity(times.len());
    let mut stats = StepStats::default();
    samples.push(TrajectorySample {
        t: 0.0,
        g: protocol.coupling_unchecked(0.0),
        state: MomentState::from_array(&y),
    });
    for w in times.windows(2) {
        stats += solver.integrate(&sys, w[0], w[1], &mut y)?;
        samples.push(TrajectorySample {
            t: w[1],
            g: protocol.coupling_unchecked(w[1]),
            state: MomentState::from_array(&y),
        });
    }
    Ok(Trajectory { samples, stats })
}

/// Closed-leg state plus the excess of the open leg over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessMoments {
    pub closed: MomentState,
    /// `(Δσ, Δ Re σ10, Δ Im σ10)` in absolute units.
    pub delta: [f64; 3],
}

impl ExcessMoments {
    pub fn open(&self) -> MomentState {
        MomentState::new(
            self.closed.sigma + self.delta[0],
            self.closed.sigma10 + Complex64::new(self.delta[1], self.delta[2]),
        )
    }

    /// Closed, open and excess observables without cancellation in the excess.
    pub fn split(&self, mode: &QuadraticMode) -> Result<ExcessSplit> {
        let closed = observables_with_mode(&self.closed, mode)?;
        let open = observables_with_mode(&self.open(), mode)?;
        let [ds, dre, _] = self.delta;
        let dx2 = 2.0 * ds - 2.0 * dre;
        let dp2 = 2.0 * ds + 2.0 * dre;
        let root_gap = |sum: f64, d: f64| if sum > 0.0 { d / sum } else { 0.0 };
        let d_energy = mode.number * ds + mode.quadrature * dx2;
        let delta = ObservableRecord {
            n: ds,
            dx: root_gap(open.dx + closed.dx, dx2),
            dp: root_gap(open.dp + closed.dp, dp2),
            energy: d_energy,
            residual_energy: d_energy,
        };
        Ok(ExcessSplit { closed, open, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessSplit {
    pub closed: ObservableRecord,
    pub open: ObservableRecord,
    pub delta: ObservableRecord,
}

/// How the open-minus-closed excess is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DeltaMethod {
    /// Joint integration of the closed leg and the scaled difference.
    #[default]
    Difference,
    /// Two independent integrations subtracted afterwards.
    Subtract,
}

/// Final-time closed state and excess for one ramp.
pub fn integrate_excess(
    protocol: &QuenchProtocol,
    model: &ModelSpec,
    bath: &BathSpec,
    settings: &IntegratorSettings,
    method: DeltaMethod,
) -> Result<ExcessMoments> {
    model.validate()?;
    settings.validate()?;
    if bath.is_closed() {
        let closed = closed_leg(protocol, model, settings)?;
        return Ok(ExcessMoments {
            closed,
            delta: [0.0; 3],
        });
    }
    match method {
        DeltaMethod::Subtract => {
            let closed = closed_leg(protocol, model, settings)?;
            let open = *integrate(protocol, model, bath, settings, Sampling::FinalOnly)?.final_state();
            Ok(ExcessMoments {
                closed,
                delta: [
                    open.sigma - closed.sigma,
                    open.sigma10.re - closed.sigma10.re,
                    open.sigma10.im - closed.sigma10.im,
                ],
            })
        }
        DeltaMethod::Difference => {
            let (unit_minus, unit_plus) = bath.unit_rates();
            let sys = ExcessLegs {
                protocol,
                model,
                kappa: bath.kappa,
                unit_minus,
                unit_plus,
            };
            let mut solver = Dop853::new(*settings, 6);
            let mut y = [0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
            solver.integrate(&sys, 0.0, protocol.tau_q(), &mut y)?;
            Ok(ExcessMoments {
                closed: MomentState::from_array(&y[..3]),
                delta: [bath.kappa * y[3], bath.kappa * y[4], bath.kappa * y[5]],
            })
        }
    }
}

pub(crate) fn closed_leg(
    protocol: &QuenchProtocol,
    model: &ModelSpec,
    settings: &IntegratorSettings,
) -> Result<MomentState> {
    Ok(*integrate(protocol, model, &BathSpec::closed(), settings, Sampling::FinalOnly)?.final_state())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaValue {
    pub isolated: f64,
    pub open: f64,
    pub delta: f64,
}

/// `δA(τ_q) = ⟨A(τ_q)⟩_open − ⟨A(τ_q)⟩` for one observable.
pub fn delta_observable(
    protocol: &QuenchProtocol,
    model: &ModelSpec,
    bath: &BathSpec,
    observable: Observable,
    settings: &IntegratorSettings,
    method: DeltaMethod,
) -> Result<DeltaValue> {
    let excess = integrate_excess(protocol, model, bath, settings, method)?;
    let mode = model.mode(protocol.g_final())?;
    let split = excess.split(&mode)?;
    Ok(DeltaValue {
        isolated: split.closed.get(observable),
        open: split.open.get(observable),
        delta: split.delta.get(observable),
    })
}

/// Writes `t, g, sigma, re_sigma10, im_sigma10, n, dx, dp, e_r`; `.csv`
/// files are comma separated, anything else tab separated.
pub fn write_trajectory(path: &Path, trajectory: &Trajectory, model: &ModelSpec) -> Result<()> {
    let sep = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => ",",
        _ => "\t",
    };
    let mut out = String::new();
    out.push_str(&["t", "g", "sigma", "re_sigma10", "im_sigma10", "n", "dx", "dp", "e_r"].join(sep));
    out.push('\n');
    for s in &trajectory.samples {
        let obs = observables_from_moments(&s.state, s.g, model)?;
        let row = [
            s.t,
            s.g,
            s.state.sigma,
            s.state.sigma10.re,
            s.state.sigma10.im,
            obs.n,
            obs.dx,
            obs.dp,
            obs.residual_energy,
        ];
        let cells: Vec<String> = row.iter().map(|v| crate::fmt_f64(*v)).collect();
        out.push_str(&cells.join(sep));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Fixed point of the moment equations at a frozen coupling `g`.
pub fn steady_state(model: &ModelSpec, g: f64, bath: &BathSpec) -> Result<MomentState> {
    model.validate()?;
    let c = model.mode(g)?.moment_coefficients();
    let r = bath.rates();
    let gm2 = 2.0 * r.gamma_minus;
    let a = nalgebra::Matrix3::new(
        gm2,
        0.0,
        2.0 * c.drive, //
        0.0,
        gm2,
        -c.rotation, //
        c.pump,
        c.rotation,
        gm2,
    );
    let b = nalgebra::Vector3::new(-r.gamma_plus, 0.0, 0.0);
    let y = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular(format!("no unique fixed point at g = {g}")))?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(format!("no unique fixed point at g = {g}")));
    }
    Ok(MomentState::from_array(y.as_slice()))
}
