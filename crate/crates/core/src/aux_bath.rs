//! Structured zero-temperature bath represented by a damped chain of
//! auxiliary oscillators attached to the system mode.
//!
//! Phase-space ordering is `x = (q_1..q_M, p_1..p_M)` with `M = N_a + 1`,
//! index 0 the system and `a = (q_1 + i p_1)/√2`. Covariances are
//! `V_jk = ⟨x_j x_k + x_k x_j⟩`, so the vacuum is `V = I`.

use std::cell::RefCell;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::moments::{
    closed_leg, observables_from_moments, DeltaMethod, ExcessMoments, MomentState, ObservableRecord, Sampling,
};
use crate::ode::{Dop853, IntegratorSettings, OdeSystem, StepStats};
use crate::protocol::QuenchProtocol;

/// One auxiliary oscillator, all entries in units of `ω_c`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxOscillator {
    pub omega: f64,
    #[serde(default)]
    pub c_re: f64,
    #[serde(default)]
    pub c_im: f64,
    #[serde(default)]
    pub d_re: f64,
    #[serde(default)]
    pub d_im: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl AuxOscillator {
    pub fn coupling(&self) -> Complex64 {
        Complex64::new(self.c_re, self.c_im)
    }

    pub fn hopping(&self) -> Complex64 {
        Complex64::new(self.d_re, self.d_im)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxBathParams {
    pub kappa: f64,
    /// Absolute cutoff frequency, in the same unit as the system `ω`.
    pub omega_c: f64,
    #[serde(rename = "oscillator")]
    pub oscillators: Vec<AuxOscillator>,
}

impl AuxBathParams {
    /// Four-oscillator fit of an Ohmic spectral density with exponential cutoff.
    pub fn ohmic_default(kappa: f64, omega_c: f64) -> Self {
        let osc = |omega, d_re, gamma, c_re, c_im| AuxOscillator {
            omega,
            c_re,
            c_im,
            d_re,
            d_im: 0.0,
            gamma,
        };
        Self {
            kappa,
            omega_c,
            oscillators: vec![
                osc(2.70796, 3.38195, 11.9298, -0.0333215, -0.0121362),
                osc(2.13014, 1.43514, 0.573494, 0.319, 0.0811955),
                osc(1.15884, 0.491546, 0.0317143, 0.760716, 0.0175762),
                osc(0.310906, 0.0, 0.000795693, 0.579218, 0.0),
            ],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::validation("aux bath", e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::validation(
                "kappa",
                format!("{} is not finite and >= 0", self.kappa),
            ));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::validation(
                "omega_c",
                format!("{} is not finite and > 0", self.omega_c),
            ));
        }
        let Some(last) = self.oscillators.last() else {
            return Err(Error::validation("oscillator", "at least one oscillator is required"));
        };
        for (k, o) in self.oscillators.iter().enumerate() {
            let finite = [o.omega, o.c_re, o.c_im, o.d_re, o.d_im, o.gamma]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::validation(format!("oscillator[{k}]"), "non-finite entry"));
            }
            if o.gamma < 0.0 {
                return Err(Error::validation(
                    format!("oscillator[{k}].gamma"),
                    format!("{} < 0", o.gamma),
                ));
            }
        }
        if last.hopping() != Complex64::new(0.0, 0.0) {
            return Err(Error::validation("oscillator", "the last oscillator must have d = 0"));
        }
        Ok(())
    }

    pub fn n_aux(&self) -> usize {
        self.oscillators.len()
    }

    /// Phase-space dimension `2(N_a + 1)`.
    pub fn phase_dim(&self) -> usize {
        2 * (self.n_aux() + 1)
    }
}

/// `[[0, I], [−I, 0]]` of size `2m`.
pub fn symplectic_form(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSystem {
    pub dim: usize,
    pub h: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub upsilon: DMatrix<Complex64>,
    pub d: DMatrix<f64>,
    omega: f64,
    g: f64,
}

impl SymplecticSystem {
    pub fn coupling(&self) -> f64 {
        self.g
    }

    /// `Γ = J H(g) − Im(Υ) J` at the coupling the system was built for.
    pub fn drift(&self) -> DMatrix<f64> {
        let im = self.upsilon.map(|z| z.im);
        &self.j * &self.h - im * &self.j
    }

    /// Same network at another coupling; only `H[q_1, q_1]` changes.
    pub fn at_coupling(&self, g: f64) -> Result<Self> {
        check_coupling(g)?;
        let mut s = self.clone();
        s.h[(0, 0)] = self.omega * (1.0 - g * g);
        s.g = g;
        Ok(s)
    }
}

fn check_coupling(g: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::domain("g", g, "0 <= g <= 1"));
    }
    Ok(())
}

/// Quadratic form of the coupling term per unit `κ`, with its `J` product.
fn coupling_form(params: &AuxBathParams) -> DMatrix<f64> {
    let m = params.n_aux() + 1;
    let wc = params.omega_c;
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    for (i, o) in params.oscillators.iter().enumerate() {
        let k = i + 1;
        // x̂ (c b + c* b†) = 2 q_1 (c_re q_k − c_im p_k)
        h[(0, k)] = 2.0 * o.c_re * wc;
        h[(k, 0)] = h[(0, k)];
        h[(0, m + k)] = -2.0 * o.c_im * wc;
        h[(m + k, 0)] = h[(0, m + k)];
    }
    h
}

/// Quadratic form and damping structure of system plus auxiliary chain.
pub fn build_system(model_omega: f64, g: f64, params: &AuxBathParams) -> Result<SymplecticSystem> {
    params.validate()?;
    check_coupling(g)?;
    if !(model_omega > 0.0 && model_omega.is_finite()) {
        return Err(Error::domain("omega", model_omega, "finite and > 0"));
    }
    let m = params.n_aux() + 1;
    let n = 2 * m;
    let wc = params.omega_c;
    let mut h = coupling_form(params) * params.kappa;
    h[(0, 0)] = model_omega * (1.0 - g * g);
    h[(m, m)] = model_omega;
    for (i, o) in params.oscillators.iter().enumerate() {
        let k = i + 1;
        h[(k, k)] = o.omega * wc;
        h[(m + k, m + k)] = o.omega * wc;
        if k + 1 < m {
            let l = k + 1;
            let (dr, di) = (o.d_re * wc, o.d_im * wc);
            // d b_k b_l† + h.c. = d_re (q_k q_l + p_k p_l) + d_im (q_k p_l − p_k q_l)
            for (a, b, v) in [(k, l, dr), (m + k, m + l, dr), (k, m + l, di), (m + k, l, -di)] {
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
    }
    let mut upsilon = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (i, o) in params.oscillators.iter().enumerate() {
        let k = i + 1;
        // L_k = √γ b_k = λ_k · J x
        let s = (o.gamma * wc / 2.0).sqrt();
        let mut lambda = vec![Complex64::new(0.0, 0.0); n];
        lambda[k] = Complex64::new(0.0, s);
        lambda[m + k] = Complex64::new(-s, 0.0);
        for a in [k, m + k] {
            for b in [k, m + k] {
                upsilon[(a, b)] += lambda[a] * lambda[b].conj();
            }
        }
    }
    let d = upsilon.map(|z| 2.0 * z.re);
    Ok(SymplecticSystem {
        dim: n,
        h,
        j: symplectic_form(m),
        upsilon,
        d,
        omega: model_omega,
        g,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    v: DMatrix<f64>,
}

impl CovarianceState {
    pub fn vacuum(dim: usize) -> Self {
        Self {
            v: DMatrix::identity(dim, dim),
        }
    }

    /// Symmetrises on construction; rejects non-square or even-size mismatch.
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() != v.ncols() || !v.nrows().is_multiple_of(2) || v.nrows() < 2 {
            return Err(Error::validation("covariance", format!("shape {:?}", v.shape())));
        }
        let v = (&v + v.transpose()) * 0.5;
        Ok(Self { v })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// Smallest eigenvalue of the hermitian `V + iJ`.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let j = symplectic_form(n / 2);
        let mut emb = DMatrix::zeros(2 * n, 2 * n);
        emb.view_mut((0, 0), (n, n)).copy_from(&self.v);
        emb.view_mut((n, n), (n, n)).copy_from(&self.v);
        emb.view_mut((0, n), (n, n)).copy_from(&(-&j));
        emb.view_mut((n, 0), (n, n)).copy_from(&j);
        SymmetricEigen::new(emb).eigenvalues.min()
    }

    pub fn check_physical(&self) -> Result<()> {
        let e = self.min_uncertainty_eigenvalue();
        if e < -1e-8 || e.is_nan() {
            return Err(Error::Physicality(format!("V + iJ has eigenvalue {e:e}")));
        }
        Ok(())
    }

    /// Reduced single-mode moments of the system oscillator.
    pub fn system_moments(&self) -> MomentState {
        let m = self.dim() / 2;
        MomentState::from_quadratures(self.v[(0, 0)], self.v[(m, m)], self.v[(0, m)])
    }
}

/// `n`, `Δx`, `Δp`, `E`, `E_r` of the system mode.
pub fn observables_from_covariance(state: &CovarianceState, g: f64, omega: f64) -> Result<ObservableRecord> {
    state.check_physical()?;
    observables_from_moments(&state.system_moments(), g, &ModelSpec::thermodynamic(omega))
}

/// `ΓV + VΓᵀ + D`, symmetric by construction.
pub fn lyapunov_rhs(state: &CovarianceState, system: &SymplecticSystem) -> DMatrix<f64> {
    let x = system.drift() * state.matrix();
    &x + x.transpose() + &system.d
}

struct Scratch {
    x: DMatrix<f64>,
}

struct LyapunovFlow<'a> {
    protocol: &'a QuenchProtocol,
    omega: f64,
    /// Drift at `g = 0`; the ramp adds `g²ω` at `(p_1, q_1)`.
    gamma0: DMatrix<f64>,
    d: DMatrix<f64>,
    scratch: RefCell<Scratch>,
}

impl LyapunovFlow<'_> {
    fn n(&self) -> usize {
        self.gamma0.nrows()
    }
}

/// `X = Γ(g) V` for `V` stored column-major in `v`.
fn drift_product(gamma0: &DMatrix<f64>, shift: f64, v: &[f64], x: &mut DMatrix<f64>) {
    let n = gamma0.nrows();
    let vm = nalgebra::DMatrixView::from_slice(v, n, n);
    x.gemm(1.0, gamma0, &vm, 0.0);
    let m = n / 2;
    for c in 0..n {
        x[(m, c)] += shift * vm[(0, c)];
    }
}

fn symmetric_sum(x: &DMatrix<f64>, extra: Option<&DMatrix<f64>>, dy: &mut [f64]) {
    let n = x.nrows();
    for c in 0..n {
        for r in 0..n {
            let mut v = x[(r, c)] + x[(c, r)];
            if let Some(e) = extra {
                v += e[(r, c)];
            }
            dy[c * n + r] = v;
        }
    }
}

impl OdeSystem for LyapunovFlow<'_> {
    fn dim(&self) -> usize {
        self.n() * self.n()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let g = self.protocol.coupling_unchecked(t);
        let mut s = self.scratch.borrow_mut();
        drift_product(&self.gamma0, g * g * self.omega, y, &mut s.x);
        symmetric_sum(&s.x, Some(&self.d), dy);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSample {
    pub t: f64,
    pub g: f64,
    pub state: CovarianceState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTrajectory {
    pub samples: Vec<CovarianceSample>,
    pub stats: StepStats,
}

impl CovarianceTrajectory {
    pub fn final_state(&self) -> &CovarianceState {
        &self.samples.last().expect("trajectory has samples").state
    }
}

fn to_state(y: &[f64], n: usize) -> CovarianceState {
    CovarianceState::new(DMatrix::from_column_slice(n, n, y)).expect("square even matrix")
}

/// Propagates `V(0) = I` over the ramp.
pub fn integrate_lyapunov(
    protocol: &QuenchProtocol,
    model_omega: f64,
    params: &AuxBathParams,
    settings: &IntegratorSettings,
    sampling: Sampling,
) -> Result<CovarianceTrajectory> {
    settings.validate()?;
    let sys = build_system(model_omega, 0.0, params)?;
    let n = sys.dim;
    let flow = LyapunovFlow {
        protocol,
        omega: model_omega,
        gamma0: sys.drift(),
        d: sys.d.clone(),
        scratch: RefCell::new(Scratch {
            x: DMatrix::zeros(n, n),
        }),
    };
    let mut solver = Dop853::new(*settings, n * n);
    let mut y: Vec<f64> = DMatrix::<f64>::identity(n, n).as_slice().to_vec();
    let times = sampling.times(protocol.tau_q());
    let mut samples = vec![CovarianceSample {
        t: 0.0,
        g: protocol.coupling_unchecked(0.0),
        state: to_state(&y, n),
    }];
    let mut stats = StepStats::default();
    for w in times.windows(2) {
        stats += solver.integrate(&flow, w[0], w[1], &mut y)?;
        samples.push(CovarianceSample {
            t: w[1],
            g: protocol.coupling_unchecked(w[1]),
            state: to_state(&y, n),
        });
    }
    Ok(CovarianceTrajectory { samples, stats })
}

/// Closed system block in `y[0..4]`, `(V_open − V_closed)/κ` in the rest.
struct ExcessFlow<'a> {
    protocol: &'a QuenchProtocol,
    omega: f64,
    gamma0: DMatrix<f64>,
    coupling: DMatrix<f64>,
    scratch: RefCell<Scratch>,
}

impl OdeSystem for ExcessFlow<'_> {
    fn dim(&self) -> usize {
        let n = self.gamma0.nrows();
        4 + n * n
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let g = self.protocol.coupling_unchecked(t);
        let (vs, diff) = y.split_at(4);
        let (dvs, ddiff) = dy.split_at_mut(4);
        // closed mode: Γ_s = [[0, ω], [−ω(1 − g²), 0]]
        let (qq, pq, qp, pp) = (vs[0], vs[1], vs[2], vs[3]);
        let a = self.omega;
        let b = -self.omega * (1.0 - g * g);
        let x = [a * pq, b * qq, a * pp, b * qp];
        dvs[0] = 2.0 * x[0];
        dvs[1] = x[1] + x[2];
        dvs[2] = x[2] + x[1];
        dvs[3] = 2.0 * x[3];

        let n = self.gamma0.nrows();
        let m = n / 2;
        let mut s = self.scratch.borrow_mut();
        drift_product(&self.gamma0, g * g * self.omega, diff, &mut s.x);
        // + C V_closed, with V_closed = I outside the system block
        let c = &self.coupling;
        let dq = (qq - 1.0, pq, qp, pp - 1.0);
        for r in 0..n {
            for col in 0..n {
                s.x[(r, col)] += c[(r, col)];
            }
            let (c0, cm) = (c[(r, 0)], c[(r, m)]);
            s.x[(r, 0)] += c0 * dq.0 + cm * dq.1;
            s.x[(r, m)] += c0 * dq.2 + cm * dq.3;
        }
        symmetric_sum(&s.x, None, ddiff);
    }
}

/// Final system-block excess of the structured bath over the closed run.
pub fn integrate_lyapunov_excess(
    protocol: &QuenchProtocol,
    model_omega: f64,
    params: &AuxBathParams,
    settings: &IntegratorSettings,
    method: DeltaMethod,
) -> Result<ExcessMoments> {
    settings.validate()?;
    let model = ModelSpec::thermodynamic(model_omega);
    if params.kappa == 0.0 {
        build_system(model_omega, 0.0, params)?;
        return Ok(ExcessMoments {
            closed: closed_leg(protocol, &model, settings)?,
            delta: [0.0; 3],
        });
    }
    match method {
        DeltaMethod::Subtract => {
            let closed = closed_leg(protocol, &model, settings)?;
            let open = integrate_lyapunov(protocol, model_omega, params, settings, Sampling::FinalOnly)?
                .final_state()
                .system_moments();
            Ok(ExcessMoments {
                closed,
                delta: [
                    open.sigma() - closed.sigma(),
                    open.sigma10().re - closed.sigma10().re,
                    open.sigma10().im - closed.sigma10().im,
                ],
            })
        }
        DeltaMethod::Difference => {
            let sys = build_system(model_omega, 0.0, params)?;
            let n = sys.dim;
            let m = n / 2;
            let flow = ExcessFlow {
                protocol,
                omega: model_omega,
                gamma0: sys.drift(),
                coupling: &sys.j * coupling_form(params),
                scratch: RefCell::new(Scratch {
                    x: DMatrix::zeros(n, n),
                }),
            };
            let mut y = vec![0.0; 4 + n * n];
            y[0] = 1.0;
            y[3] = 1.0;
            let mut solver = Dop853::new(*settings, y.len());
            solver.integrate(&flow, 0.0, protocol.tau_q(), &mut y)?;
            let closed = MomentState::from_quadratures(y[0], y[3], 0.5 * (y[1] + y[2]));
            let dv = |r: usize, c: usize| params.kappa * y[4 + c * n + r];
            let delta = MomentState::from_quadratures(dv(0, 0), dv(m, m), 0.5 * (dv(0, m) + dv(m, 0)));
            Ok(ExcessMoments {
                closed,
                delta: [delta.sigma(), delta.sigma10().re, delta.sigma10().im],
            })
        }
    }
}
