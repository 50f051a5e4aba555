//! Dissipative quench dynamics of fully-connected models near their
//! second-order transition, treated in the Gaussian (quadratic) approximation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod aux_bath;
pub mod error;
pub mod experiment;
pub mod model;
pub mod moments;
pub mod ode;
pub mod protocol;
pub mod scaling;

pub use error::{Error, Result};
pub use model::{CriticalExponents, ModelKind, ModelSpec, Observable, QrmCorrection, QuadraticMode};
pub use moments::{BathSpec, DeltaMethod, MomentState, ObservableRecord};
pub use ode::IntegratorSettings;
pub use protocol::QuenchProtocol;

/// Round-trippable scientific formatting used by every text output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
