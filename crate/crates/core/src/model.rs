//! Fully-connected critical models reduced to a single bosonic mode.
//!
//! In the normal phase `0 <= g <= 1` both the Rabi and the
//! Lipkin-Meshkov-Glick models reduce to
//! `H(g) = ω a†a − (g²ω/4)(a + a†)²`; finite sizes add `1/η` corrections
//! that are kept up to quadratic order after normal ordering. Constant
//! energy offsets are dropped throughout.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::moments::MomentState;

/// Critical coupling of the normal-phase Hamiltonian.
pub const G_CRITICAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    ThermodynamicLimit,
    Qrm,
    Lmg,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thermodynamic" | "thermodynamic_limit" | "tl" => Ok(Self::ThermodynamicLimit),
            "qrm" | "rabi" => Ok(Self::Qrm),
            "lmg" => Ok(Self::Lmg),
            _ => Err(Error::validation("model.kind", format!("unknown model `{s}`"))),
        }
    }
}

/// Which quadratic reduction of the Rabi `1/η` correction to use.
///
/// `Twelve` replaces the drive by `G − 12 g⁴ω/η`; `NormalOrdered` keeps the
/// quadratic part of `(g⁴ω/16η)(a + a†)⁴`, which amounts to `G − (3/4) g⁴ω/η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum QrmCorrection {
    #[default]
    Twelve,
    NormalOrdered,
}

impl FromStr for QrmCorrection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twelve" => Ok(Self::Twelve),
            "normal_ordered" | "normal-ordered" => Ok(Self::NormalOrdered),
            _ => Err(Error::validation(
                "model.qrm_correction",
                format!("expected `twelve` or `normal_ordered`, got `{s}`"),
            )),
        }
    }
}

impl QrmCorrection {
    fn quartic_coefficient(self) -> f64 {
        match self {
            Self::Twelve => 12.0,
            Self::NormalOrdered => 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `Ω/ω` for the Rabi model, spin number `N` for LMG; infinite in the
    /// thermodynamic limit.
    pub eta: f64,
    pub omega: f64,
    pub qrm_correction: QrmCorrection,
}

impl ModelSpec {
    pub fn thermodynamic(omega: f64) -> Self {
        Self {
            kind: ModelKind::ThermodynamicLimit,
            eta: f64::INFINITY,
            omega,
            qrm_correction: QrmCorrection::default(),
        }
    }

    pub fn qrm(eta: f64, omega: f64) -> Self {
        Self {
            kind: ModelKind::Qrm,
            eta,
            omega,
            qrm_correction: QrmCorrection::default(),
        }
    }

    pub fn lmg(eta: f64, omega: f64) -> Self {
        Self {
            kind: ModelKind::Lmg,
            eta,
            omega,
            qrm_correction: QrmCorrection::default(),
        }
    }

    pub fn with_qrm_correction(mut self, c: QrmCorrection) -> Self {
        self.qrm_correction = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::validation("model.omega", "must be finite and > 0"));
        }
        if !(self.eta > 0.0) || self.eta.is_nan() {
            return Err(Error::validation("model.eta", "must be > 0 (or infinite)"));
        }
        if self.kind == ModelKind::ThermodynamicLimit && self.eta.is_finite() {
            return Err(Error::validation(
                "model.eta",
                "the thermodynamic limit has no finite size",
            ));
        }
        Ok(())
    }

    /// Effective quadratic Hamiltonian at coupling `g`.
    pub fn mode(&self, g: f64) -> Result<QuadraticMode> {
        check_coupling(g)?;
        Ok(self.mode_unchecked(g))
    }

    pub(crate) fn mode_unchecked(&self, g: f64) -> QuadraticMode {
        let w = self.omega;
        let g2 = g * g;
        let inv_eta = 1.0 / self.eta;
        match self.kind {
            ModelKind::ThermodynamicLimit => QuadraticMode::new(w, -g2 * w / 4.0),
            ModelKind::Qrm => {
                let c = self.qrm_correction.quartic_coefficient();
                let drive = g2 * w / 2.0 - c * g2 * g2 * w * inv_eta;
                QuadraticMode::new(w, -drive / 2.0)
            }
            ModelKind::Lmg => {
                // ω a†a − (g²ω/4)(a+a†)² + (g²ω/8η)(4a†a + a² + a†²)
                QuadraticMode::new(w + g2 * w * inv_eta / 4.0, -(g2 * w / 4.0) * (1.0 - inv_eta / 2.0))
            }
        }
    }

    /// Drive coefficient `G` entering the moment equations.
    ///
    /// For LMG the finite-size correction is not a pure drive shift, so the
    /// thermodynamic-limit value is returned; see [`lmg_coefficients`].
    pub fn effective_drive(&self, g: f64) -> Result<f64> {
        check_coupling(g)?;
        let tl = g * g * self.omega / 2.0;
        Ok(match self.kind {
            ModelKind::ThermodynamicLimit | ModelKind::Lmg => tl,
            ModelKind::Qrm => {
                let c = self.qrm_correction.quartic_coefficient();
                tl - c * g.powi(4) * self.omega / self.eta
            }
        })
    }
}

/// `H = number · a†a + quadrature · (a + a†)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMode {
    pub number: f64,
    pub quadrature: f64,
}

/// Coefficients of the single-mode moment equations
/// `σ̇ ∋ i·drive·(σ01 − σ10)` and `σ̇10 ∋ i·rotation·σ10 + i·pump·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCoefficients {
    pub drive: f64,
    pub rotation: f64,
    pub pump: f64,
}

impl QuadraticMode {
    pub fn new(number: f64, quadrature: f64) -> Self {
        Self { number, quadrature }
    }

    pub fn moment_coefficients(&self) -> MomentCoefficients {
        MomentCoefficients {
            drive: -2.0 * self.quadrature,
            rotation: 2.0 * (self.number + 2.0 * self.quadrature),
            pump: -4.0 * self.quadrature,
        }
    }

    /// Squared excitation energy; negative past the instability.
    pub fn gap_squared(&self) -> f64 {
        self.number * (self.number + 4.0 * self.quadrature)
    }

    pub fn gap(&self) -> f64 {
        self.gap_squared().max(0.0).sqrt()
    }

    /// Ground-state energy including the `quadrature` constant from
    /// `(a + a†)² = a² + a†² + 2a†a + 1`.
    pub fn ground_state_energy(&self) -> f64 {
        (self.gap() - self.number) / 2.0
    }

    /// `⟨H⟩` in the same energy convention as [`ground_state_energy`].
    pub fn energy(&self, state: &MomentState) -> f64 {
        self.number * (state.sigma() - 0.5) + self.quadrature * state.x_second_moment()
    }

    pub fn ground_state(&self) -> Result<MomentState> {
        let stiff = self.number + 4.0 * self.quadrature;
        if !(stiff > 0.0) || !(self.number > 0.0) {
            return Err(Error::Singular(format!(
                "no normalisable ground state (a†a coefficient {}, x² stiffness {})",
                self.number, stiff
            )));
        }
        let x2 = (self.number / stiff).sqrt();
        let p2 = 1.0 / x2;
        Ok(MomentState::from_quadratures(x2, p2, 0.0))
    }
}

fn check_coupling(g: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::domain("g", g, "0 <= g <= 1"));
    }
    Ok(())
}

/// `k ω √(1 − g²)`.
pub fn gap(omega: f64, g: f64, k: u32) -> Result<f64> {
    check_coupling(g)?;
    Ok(k as f64 * omega * (1.0 - g * g).sqrt())
}

/// `ω (√(1 − g²) − 1) / 2`.
pub fn ground_state_energy(omega: f64, g: f64) -> Result<f64> {
    check_coupling(g)?;
    Ok(omega * ((1.0 - g * g).sqrt() - 1.0) / 2.0)
}

/// Squeezed vacuum `S[¼ ln(1 − g²)]|0⟩` of the thermodynamic-limit mode.
pub fn ground_state_moments(g: f64) -> Result<MomentState> {
    check_coupling(g)?;
    if g >= G_CRITICAL {
        return Err(Error::Singular("ground-state moments diverge at g = 1".into()));
    }
    let x2 = (1.0 - g * g).powf(-0.5);
    Ok(MomentState::from_quadratures(x2, 1.0 / x2, 0.0))
}

/// The three finite-size LMG coefficients `(c_drive, c_rot, c_pump)`.
pub fn lmg_coefficients(omega: f64, g: f64, eta: f64) -> (f64, f64, f64) {
    let g2 = g * g;
    let shrink = 1.0 - 1.0 / (2.0 * eta);
    (
        g2 * omega / 2.0 * shrink,
        omega * g2 * (1.0 / eta - 1.0),
        omega * g2 * shrink,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    Occupation,
    DeltaX,
    DeltaP,
    ResidualEnergy,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::Occupation,
        Observable::DeltaX,
        Observable::DeltaP,
        Observable::ResidualEnergy,
    ];

    /// Column stem used in tables and reports.
    pub fn key(self) -> &'static str {
        match self {
            Observable::Occupation => "n",
            Observable::DeltaX => "dx",
            Observable::DeltaP => "dp",
            Observable::ResidualEnergy => "e_r",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "adag_a" | "a†a" | "occupation" | "number" => Ok(Self::Occupation),
            "dx" | "delta_x" | "Δx" => Ok(Self::DeltaX),
            "dp" | "delta_p" | "Δp" => Ok(Self::DeltaP),
            "e_r" | "er" | "residual_energy" => Ok(Self::ResidualEnergy),
            _ => Err(Error::UnknownObservable(s.to_string())),
        }
    }
}

/// Equilibrium exponents of the mean-field transition.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalExponents {
    pub z_nu: Rational64,
    pub dimension: u32,
    gammas: Vec<(Observable, Rational64)>,
}

impl Default for CriticalExponents {
    fn default() -> Self {
        Self::mean_field()
    }
}

impl CriticalExponents {
    pub fn mean_field() -> Self {
        let r = Rational64::new;
        Self {
            z_nu: r(1, 2),
            dimension: 0,
            gammas: vec![
                (Observable::Occupation, r(-1, 2)),
                (Observable::DeltaX, r(-1, 4)),
                (Observable::DeltaP, r(1, 4)),
                (Observable::ResidualEnergy, r(1, 2)),
            ],
        }
    }

    pub fn gamma(&self, obs: Observable) -> Result<Rational64> {
        self.gammas
            .iter()
            .find(|(o, _)| *o == obs)
            .map(|(_, g)| *g)
            .ok_or_else(|| Error::UnknownObservable(obs.to_string()))
    }

    /// KZ power of `τ_q` for a closed quench ending at the critical point.
    pub fn predicted_kz_exponent(&self, obs: Observable) -> Result<Rational64> {
        let gamma = self.gamma(obs)?;
        Ok(-gamma / (self.z_nu + 1))
    }
}
