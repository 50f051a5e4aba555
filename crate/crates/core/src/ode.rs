//! Explicit Dormand–Prince 8(5,3) integrator with adaptive step control.
//!
//! Coefficients are the published DOP853 tableau (Hairer, Nørsett & Wanner);
//! the step-size controller follows the reference implementation with a
//! zero PI-beta. The solver owns its stage buffers so repeated calls over the
//! same dimension do not allocate.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)` of a real first-order system.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; `None` means the whole interval.
    pub h_max: Option<f64>,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
            h_max: None,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::validation("integrator.rtol", "must lie in (0, 1)"));
        }
        if !(self.atol > 0.0) {
            return Err(Error::validation("integrator.atol", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::validation("integrator.max_steps", "must be positive"));
        }
        if let Some(h) = self.h_max {
            if !(h > 0.0) {
                return Err(Error::validation("integrator.h_max", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

mod tableau {
    pub const C: [f64; 12] = [
        0.0,
        0.526001519587677318785587544488E-01,
        0.789002279381515978178381316732E-01,
        0.118350341907227396726757197510E+00,
        0.281649658092772603273242802490E+00,
        0.333333333333333333333333333333E+00,
        0.25E+00,
        0.307692307692307692307692307692E+00,
        0.651282051282051282051282051282E+00,
        0.6E+00,
        0.857142857142857142857142857142E+00,
        1.0,
    ];

    // Row i holds a_{i+1, 1..=i}; zeros kept so every row indexes stages directly.
    pub const A: [[f64; 11]; 12] = [
        [0.0; 11],
        [
            5.26001519587677318785587544488E-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            1.97250569845378994544595329183E-2,
            5.91751709536136983633785987549E-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2.95875854768068491816892993775E-2,
            0.0,
            8.87627564304205475450678981324E-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2.41365134159266685502369798665E-1,
            0.0,
            -8.84549479328286085344864962717E-1,
            9.24834003261792003115737966543E-1,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.7037037037037037037037037037E-2,
            0.0,
            0.0,
            1.70828608729473871279604482173E-1,
            1.25467687566822425016691814123E-1,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.7109375E-2,
            0.0,
            0.0,
            1.70252211019544039314978060272E-1,
            6.02165389804559606850219397283E-2,
            -1.7578125E-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.70920001185047927108779319836E-2,
            0.0,
            0.0,
            1.70383925712239993810214054705E-1,
            1.07262030446373284651809199168E-1,
            -1.53194377486244017527936158236E-2,
            8.27378916381402288758473766002E-3,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            6.24110958716075717114429577812E-1,
            0.0,
            0.0,
            -3.36089262944694129406857109825E0,
            -8.68219346841726006818189891453E-1,
            2.75920996994467083049415600797E1,
            2.01540675504778934086186788979E1,
            -4.34898841810699588477366255144E1,
            0.0,
            0.0,
            0.0,
        ],
        [
            4.77662536438264365890433908527E-1,
            0.0,
            0.0,
            -2.48811461997166764192642586468E0,
            -5.90290826836842996371446475743E-1,
            2.12300514481811942347288949897E1,
            1.52792336328824235832596922938E1,
            -3.32882109689848629194453265587E1,
            -2.03312017085086261358222928593E-2,
            0.0,
            0.0,
        ],
        [
            -9.3714243008598732571704021658E-1,
            0.0,
            0.0,
            5.18637242884406370830023853209E0,
            1.09143734899672957818500254654E0,
            -8.14978701074692612513997267357E0,
            -1.85200656599969598641566180701E1,
            2.27394870993505042818970056734E1,
            2.49360555267965238987089396762E0,
            -3.0467644718982195003823669022E0,
            0.0,
        ],
        [
            2.27331014751653820792359768449E0,
            0.0,
            0.0,
            -1.05344954667372501984066689879E1,
            -2.00087205822486249909675718444E0,
            -1.79589318631187989172765950534E1,
            2.79488845294199600508499808837E1,
            -2.85899827713502369474065508674E0,
            -8.87285693353062954433549289258E0,
            1.23605671757943030647266201528E1,
            6.43392746015763530355970484046E-1,
        ],
    ];

    pub const B: [f64; 12] = [
        5.42937341165687622380535766363E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        4.45031289275240888144113950566E0,
        1.89151789931450038304281599044E0,
        -5.8012039600105847814672114227E0,
        3.1116436695781989440891606237E-1,
        -1.52160949662516078556178806805E-1,
        2.01365400804030348374776537501E-1,
        4.47106157277725905176885569043E-2,
    ];

    /// Third-order embedded weights on stages 1, 9 and 12.
    pub const BHH: [f64; 3] = [
        0.244094488188976377952755905512E+00,
        0.733846688281611857341361741547E+00,
        0.220588235294117647058823529412E-01,
    ];

    /// Fifth-order error weights.
    pub const E: [f64; 12] = [
        0.1312004499419488073250102996E-01,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.1225156446376204440720569753E+01,
        -0.4957589496572501915214079952E+00,
        0.1664377182454986536961530415E+01,
        -0.3503288487499736816886487290E+00,
        0.3341791187130174790297318841E+00,
        0.8192320648511571246570742613E-01,
        -0.2235530786388629525884427845E-01,
    ];
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

pub struct Dop853 {
    settings: IntegratorSettings,
    dim: usize,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    y_new: Vec<f64>,
    /// Step size carried between consecutive calls.
    h_hint: Option<f64>,
}

impl Dop853 {
    pub fn new(settings: IntegratorSettings, dim: usize) -> Self {
        Self {
            settings,
            dim,
            k: vec![vec![0.0; dim]; 12],
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            h_hint: None,
        }
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.settings.atol + self.settings.rtol * a.abs().max(b.abs())
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h_max: f64) -> f64 {
        let n = self.dim as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..self.dim {
            let sc = self.scale(y[i], 0.0);
            d0 += (y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        d0 = (d0 / n).sqrt();
        d1 = (d1 / n).sqrt();
        let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(h_max);
        for i in 0..self.dim {
            self.stage[i] = y[i] + h * self.k[0][i];
        }
        sys.rhs(t + h, &self.stage, &mut self.k[1]);
        let mut d2 = 0.0;
        for i in 0..self.dim {
            let sc = self.scale(y[i], 0.0);
            d2 += ((self.k[1][i] - self.k[0][i]) / sc).powi(2);
        }
        d2 = (d2 / n).sqrt() / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            1e-6_f64.max(h * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(h_max)
    }

    /// Advances `y` from `t0` to `t1` in place.
    pub fn integrate<S: OdeSystem>(&mut self, sys: &S, t0: f64, t1: f64, y: &mut [f64]) -> Result<StepStats> {
        assert_eq!(y.len(), self.dim, "state dimension mismatch");
        assert_eq!(sys.dim(), self.dim, "system dimension mismatch");
        let mut stats = StepStats::default();
        if t1 <= t0 {
            return Ok(stats);
        }
        let n = self.dim;
        let span = t1 - t0;
        let h_max = self.settings.h_max.unwrap_or(span).min(span);
        let mut t = t0;

        sys.rhs(t, y, &mut self.k[0]);
        stats.evaluations += 1;
        let mut h = match self.h_hint {
            Some(h) => h.min(h_max),
            None => {
                stats.evaluations += 1;
                self.initial_step(sys, t, y, h_max)
            }
        };
        let mut reject = false;
        let mut last = false;

        loop {
            if stats.accepted + stats.rejected >= self.settings.max_steps {
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("step budget of {} exhausted", self.settings.max_steps),
                });
            }
            if 0.1 * h.abs() <= t.abs() * f64::EPSILON || !h.is_finite() {
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            if t + 1.01 * h >= t1 {
                h = t1 - t;
                last = true;
            }

            for s in 1..12 {
                let row = &tableau::A[s];
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in row.iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += a * self.k[j][i];
                        }
                    }
                    self.stage[i] = y[i] + h * acc;
                }
                sys.rhs(t + tableau::C[s] * h, &self.stage, &mut self.k[s]);
            }
            stats.evaluations += 11;

            let (mut err5, mut err3) = (0.0, 0.0);
            for i in 0..n {
                let mut bsum = 0.0;
                let mut esum = 0.0;
                for j in 0..12 {
                    bsum += tableau::B[j] * self.k[j][i];
                    esum += tableau::E[j] * self.k[j][i];
                }
                self.y_new[i] = y[i] + h * bsum;
                let sc = self.scale(y[i], self.y_new[i]);
                let e3 = bsum
                    - tableau::BHH[0] * self.k[0][i]
                    - tableau::BHH[1] * self.k[8][i]
                    - tableau::BHH[2] * self.k[11][i];
                err3 += (e3 / sc).powi(2);
                err5 += (esum / sc).powi(2);
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err5 * (1.0 / (n as f64 * deno)).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    t_last: t,
                    reason: "non-finite error estimate".into(),
                });
            }

            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                stats.accepted += 1;
                y.copy_from_slice(&self.y_new);
                t = if last { t1 } else { t + h };
                if last {
                    self.h_hint = Some(h_new.min(h_max).max(h));
                    return Ok(stats);
                }
                sys.rhs(t, y, &mut self.k[0]);
                stats.evaluations += 1;
                h_new = h_new.min(h_max);
                if reject {
                    h_new = h_new.min(h);
                }
                reject = false;
            } else {
                h_new = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                reject = true;
                last = false;
                if stats.accepted >= 1 {
                    stats.rejected += 1;
                }
            }
            h = h_new;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic {
        omega: f64,
    }

    impl OdeSystem for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.omega * y[1];
            dy[1] = -self.omega * y[0];
        }
    }

    struct TimeDependent;

    impl OdeSystem for TimeDependent {
        fn dim(&self) -> usize {
            1
        }
        // y' = cos(t) y, y = exp(sin t)
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = t.cos() * y[0];
        }
    }

    #[test]
    fn tableau_rows_are_consistent() {
        for s in 1..12 {
            let sum: f64 = tableau::A[s].iter().sum();
            assert!((sum - tableau::C[s]).abs() < 1e-13, "row {s}: {sum}");
        }
        let bsum: f64 = tableau::B.iter().sum();
        assert!((bsum - 1.0).abs() < 1e-13);
        let esum: f64 = tableau::E.iter().sum();
        assert!(esum.abs() < 1e-13);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let sys = Harmonic { omega: 2.0 };
        let mut solver = Dop853::new(IntegratorSettings::default(), 2);
        let mut y = [1.0, 0.0];
        let t_end = 1000.0;
        solver.integrate(&sys, 0.0, t_end, &mut y).unwrap();
        assert!((y[0] - (2.0 * t_end).cos()).abs() < 1e-7);
        assert!((y[1] + (2.0 * t_end).sin()).abs() < 1e-7);
    }

    #[test]
    fn eighth_order_convergence_on_fixed_step() {
        // Force fixed steps through h_max with loose tolerance.
        let run = |h: f64| {
            let settings = IntegratorSettings {
                rtol: 0.5,
                atol: 0.5,
                h_max: Some(h),
                ..Default::default()
            };
            let mut solver = Dop853::new(settings, 1);
            let mut y = [1.0];
            solver.integrate(&TimeDependent, 0.0, 4.0, &mut y).unwrap();
            (y[0] - 4.0_f64.sin().exp()).abs()
        };
        let e1 = run(0.4);
        let e2 = run(0.2);
        let order = (e1 / e2).log2();
        assert!(order > 7.0, "observed order {order} ({e1:e} -> {e2:e})");
    }

    #[test]
    fn segments_compose() {
        let sys = TimeDependent;
        let mut a = Dop853::new(IntegratorSettings::default(), 1);
        let mut y = [1.0];
        for k in 0..10 {
            a.integrate(&sys, k as f64, (k + 1) as f64, &mut y).unwrap();
        }
        assert!((y[0] - 10.0_f64.sin().exp()).abs() < 1e-9);
    }

    #[test]
    fn step_budget_reports_last_time() {
        let settings = IntegratorSettings {
            max_steps: 5,
            ..Default::default()
        };
        let mut solver = Dop853::new(settings, 2);
        let mut y = [1.0, 0.0];
        match solver.integrate(&Harmonic { omega: 1.0 }, 0.0, 1e4, &mut y) {
            Err(Error::Integration { t_last, .. }) => assert!(t_last > 0.0 && t_last < 1e4),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }
}
