//! Ramp shapes for the control parameter and the adiabatic-impulse boundary.

use crate::error::{Error, Result};

/// Ramp `g(t) = g_final (1 - (1 - t/tau_q)^r_n)` on `[0, tau_q]`.
///
/// `r_n = 1` is the linear ramp `g_final t / tau_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchProtocol {
    g_final: f64,
    tau_q: f64,
    r_n: f64,
}

impl QuenchProtocol {
    pub fn new(g_final: f64, tau_q: f64, r_n: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g_final) {
            return Err(Error::domain("g_final", g_final, "0 <= g_final <= 1"));
        }
        if !(tau_q > 0.0 && tau_q.is_finite()) {
            return Err(Error::domain("tau_q", tau_q, "finite and > 0"));
        }
        if !(r_n > 0.0 && r_n.is_finite()) {
            return Err(Error::domain("r_n", r_n, "finite and > 0"));
        }
        Ok(Self { g_final, tau_q, r_n })
    }

    pub fn linear(g_final: f64, tau_q: f64) -> Result<Self> {
        Self::new(g_final, tau_q, 1.0)
    }

    pub fn g_final(&self) -> f64 {
        self.g_final
    }

    pub fn tau_q(&self) -> f64 {
        self.tau_q
    }

    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    pub fn is_linear(&self) -> bool {
        self.r_n == 1.0
    }

    /// Same shape over a different duration.
    pub fn with_tau(&self, tau_q: f64) -> Result<Self> {
        Self::new(self.g_final, tau_q, self.r_n)
    }

    pub fn coupling_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.tau_q).contains(&t) {
            return Err(Error::domain("t", t, "0 <= t <= tau_q"));
        }
        Ok(self.coupling_unchecked(t))
    }

    /// `coupling_at` without the domain check, for integrator stages that
    /// may sit a rounding error past the endpoint.
    pub(crate) fn coupling_unchecked(&self, t: f64) -> f64 {
        if t >= self.tau_q {
            return self.g_final;
        }
        if self.r_n == 1.0 {
            return self.g_final * (t / self.tau_q);
        }
        let base = (1.0 - t / self.tau_q).max(0.0);
        let tail = if base == 0.0 { 0.0 } else { (self.r_n * base.ln()).exp() };
        self.g_final * (1.0 - tail)
    }
}

/// Power of `tau_q` governing `|g~ - g_c|` for a ramp with exponent `r_n`:
/// `-r_n / (z_nu r_n + 1)`.
pub fn impulse_boundary_exponent(z_nu: f64, r_n: f64) -> Result<f64> {
    if !(z_nu > 0.0) {
        return Err(Error::domain("z_nu", z_nu, "> 0"));
    }
    if !(r_n > 0.0) {
        return Err(Error::domain("r_n", r_n, "> 0"));
    }
    Ok(-r_n / (z_nu * r_n + 1.0))
}
