//! Power-law fits of excess observables and the scaling predictions they are
//! compared against.

use std::fmt;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::model::{CriticalExponents, Observable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub stderr_b: f64,
    pub n_points: usize,
    pub window: (f64, f64),
    pub residual_rms: f64,
}

impl PowerLawFit {
    pub fn eval(&self, tau: f64) -> f64 {
        self.amplitude * tau.powf(self.exponent)
    }
}

/// OLS fit of `ln v = ln a + b ln τ` over the points with `τ` inside `window`
/// (inclusive; `None` takes every point).
pub fn fit_power_law(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<PowerLawFit> {
    if let Some((lo, hi)) = window {
        if !(lo < hi) {
            return Err(Error::validation("window", format!("({lo}, {hi}) is empty")));
        }
    }
    let inside = |t: f64| window.is_none_or(|(lo, hi)| t >= lo && t <= hi);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(tau, v) in points {
        if !inside(tau) {
            continue;
        }
        if !(tau > 0.0) || !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonLoggable { tau, value: v });
        }
        xs.push(tau.ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData { needed: 3, got: 1 });
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - ln_a - b * x;
            r * r
        })
        .sum();
    let (t_min, t_max) = points
        .iter()
        .filter(|(t, _)| inside(*t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (t, _)| {
            (lo.min(*t), hi.max(*t))
        });
    Ok(PowerLawFit {
        amplitude: ln_a.exp(),
        exponent: b,
        stderr_b: (rss / (nf - 2.0) / sxx).sqrt(),
        n_points: n,
        window: (t_min, t_max),
        residual_rms: (rss / nf).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    KzIsolated,
    AkzCritical,
    /// Ramp ending below the critical point.
    AkzLinear,
    Adiabatic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::KzIsolated => "kz-isolated",
            Regime::AkzCritical => "akz-critical",
            Regime::AkzLinear => "akz-linear",
            Regime::Adiabatic => "adiabatic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPrediction {
    pub observable: Observable,
    pub regime: Regime,
    pub exponent: Rational64,
    pub r_n: Rational64,
}

impl ScalingPrediction {
    pub fn exponent_f64(&self) -> f64 {
        ratio_to_f64(self.exponent)
    }
}

pub fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact ramp exponent; rejects values with no short rational form.
pub fn ramp_exponent(r_n: f64) -> Result<Rational64> {
    if !(r_n > 0.0 && r_n.is_finite()) {
        return Err(Error::domain("r_n", r_n, "finite and > 0"));
    }
    let r = Rational64::approximate_float(r_n).ok_or(Error::domain("r_n", r_n, "representable as a ratio"))?;
    Ok(r)
}

/// Power of `τ_q` in `δA`: `(zν r + 1 − γ r)/(zν r + 1)` at the critical
/// point, `1` for ramps stopping short of it.
pub fn predicted_akz_exponent(
    exponents: &CriticalExponents,
    observable: Observable,
    r_n: Rational64,
    at_critical: bool,
) -> Result<ScalingPrediction> {
    let gamma = exponents.gamma(observable)?;
    if r_n <= Rational64::from_integer(0) {
        return Err(Error::domain("r_n", ratio_to_f64(r_n), "> 0"));
    }
    let (regime, exponent) = if at_critical {
        let zr = exponents.z_nu * r_n + 1;
        (Regime::AkzCritical, (zr - gamma * r_n) / zr)
    } else {
        (Regime::AkzLinear, Rational64::from_integer(1))
    };
    Ok(ScalingPrediction {
        observable,
        regime,
        exponent,
        r_n,
    })
}

/// Closed-system KZ power for a ramp into the critical point:
/// `−γ r/(zν r + 1)`.
pub fn predicted_kz_exponent(
    exponents: &CriticalExponents,
    observable: Observable,
    r_n: Rational64,
) -> Result<ScalingPrediction> {
    let gamma = exponents.gamma(observable)?;
    if r_n <= Rational64::from_integer(0) {
        return Err(Error::domain("r_n", ratio_to_f64(r_n), "> 0"));
    }
    Ok(ScalingPrediction {
        observable,
        regime: Regime::KzIsolated,
        exponent: -gamma * r_n / (exponents.z_nu * r_n + 1),
        r_n,
    })
}

/// Closed-system defects of a ramp ending away from the critical point.
pub fn adiabatic_prediction(observable: Observable) -> ScalingPrediction {
    ScalingPrediction {
        observable,
        regime: Regime::Adiabatic,
        exponent: Rational64::from_integer(-2),
        r_n: Rational64::from_integer(1),
    }
}

/// `r_c τ^{−γ/(zν+1)} + r_o τ^{(zν+1−γ)/(zν+1)}`: closed-system KZ part plus
/// the open-system excess.
pub fn total_defect(tau: f64, r_c: f64, r_o: f64, gamma: f64, z_nu: f64) -> f64 {
    let s = z_nu + 1.0;
    r_c * tau.powf(-gamma / s) + r_o * tau.powf((s - gamma) / s)
}

fn check_rates(r_c: f64, r_o: f64, z_nu: f64) -> Result<()> {
    if !(r_c > 0.0 && r_c.is_finite()) {
        return Err(Error::domain("r_c", r_c, "finite and > 0"));
    }
    if !(r_o > 0.0 && r_o.is_finite()) {
        return Err(Error::domain("r_o", r_o, "finite and > 0"));
    }
    if !(z_nu > 0.0) {
        return Err(Error::domain("z_nu", z_nu, "> 0"));
    }
    Ok(())
}

fn regime_of(gamma: f64, z_nu: f64) -> &'static str {
    let s = z_nu + 1.0;
    if gamma > 0.0 && gamma < s {
        "minimum (optimal quench time)"
    } else if gamma < 0.0 && gamma > -s {
        "inflection point"
    } else {
        "none: total defect is monotone"
    }
}

/// Minimiser `r_c γ / (r_o (zν + 1 − γ))` of [`total_defect`].
pub fn optimal_quench_time(r_c: f64, r_o: f64, gamma: f64, z_nu: f64) -> Result<f64> {
    check_rates(r_c, r_o, z_nu)?;
    if !(gamma > 0.0 && gamma < z_nu + 1.0) {
        return Err(Error::Regime(format!(
            "no optimal quench time for gamma = {gamma}, z_nu = {z_nu}; applicable regime: {}",
            regime_of(gamma, z_nu)
        )));
    }
    Ok(r_c * gamma / (r_o * (z_nu + 1.0 - gamma)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    /// Root of the second derivative of [`total_defect`].
    pub tau: f64,
    /// `r_c (1 + γ + zν)(1 − γ + zν) / r_o`, an alternative grouping of the
    /// same factors, reported for comparison only.
    pub grouped: f64,
}

/// Sign change of `d²/dτ²` [`total_defect`] for `−zν − 1 < γ < 0`.
pub fn inflection_time(r_c: f64, r_o: f64, gamma: f64, z_nu: f64) -> Result<Inflection> {
    check_rates(r_c, r_o, z_nu)?;
    let s = z_nu + 1.0;
    if !(gamma < 0.0 && gamma > -s) {
        return Err(Error::Regime(format!(
            "no inflection point for gamma = {gamma}, z_nu = {z_nu}; applicable regime: {}",
            regime_of(gamma, z_nu)
        )));
    }
    let a = -gamma / s;
    // f''(τ) τ^{2−a} / a = r_c (a − 1) + r_o (1 + a) τ, increasing in τ
    let scaled = |ln_tau: f64| r_c * (a - 1.0) + r_o * (1.0 + a) * ln_tau.exp();
    let guess = (r_c / r_o).ln();
    let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
    while scaled(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while scaled(hi) < 0.0 {
        hi += 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if scaled(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(Inflection {
        tau: (0.5 * (lo + hi)).exp(),
        grouped: r_c * (1.0 + gamma + z_nu) * (1.0 - gamma + z_nu) / r_o,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fit: PowerLawFit,
    pub prediction: ScalingPrediction,
    pub tolerance: f64,
}

impl FitReport {
    pub fn new(fit: PowerLawFit, prediction: ScalingPrediction, tolerance: f64) -> Self {
        Self {
            fit,
            prediction,
            tolerance,
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.fit.exponent - self.prediction.exponent_f64()).abs()
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= self.tolerance
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.prediction;
        writeln!(f, "observable = {}", p.observable)?;
        writeln!(f, "regime = {}", p.regime)?;
        writeln!(f, "window = [{:.6e}, {:.6e}]", self.fit.window.0, self.fit.window.1)?;
        writeln!(f, "points = {}", self.fit.n_points)?;
        writeln!(f, "a = {:.6e}", self.fit.amplitude)?;
        writeln!(f, "b = {:.6}", self.fit.exponent)?;
        writeln!(f, "stderr_b = {:.3e}", self.fit.stderr_b)?;
        writeln!(f, "predicted = {} ({:.6})", p.exponent, p.exponent_f64())?;
        writeln!(f, "deviation = {:.3e}", self.deviation())?;
        writeln!(f, "tolerance = {:.3e}", self.tolerance)?;
        writeln!(f, "verdict = {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}
