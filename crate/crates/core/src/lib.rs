//! Online probability forecasting for `d` classes under the Brier loss.
//!
//! Three forecasters compete with linear (or RKHS) experts:
//!
//! * [`Maar`]: Aggregating Algorithm over multi-dimensional linear experts,
//!   with an exact substitution step.
//! * [`Caar`]: one-dimensional AAR per class, projected onto the simplex.
//! * [`Kaar`]: the kernelized dual of [`Maar`].
//!
//! [`bounds`] computes their worst-case loss guarantees and checks them on
//! concrete streams; [`harness`] holds the time-series experiment protocol.

pub mod bounds;
pub mod caar;
pub mod error;
pub mod harness;
pub mod kaar;
pub mod maar;
pub mod projection;
pub mod structured;
pub mod substitution;
pub mod types;

#[cfg(test)]
mod oracle;

pub use caar::Caar;
pub use error::{Error, Result};
pub use kaar::{Kaar, Kernel};
pub use maar::{InverseMode, Maar, MaarConfig};
pub use projection::project_to_simplex;
pub use substitution::{solve_substitution, GeneralizedPrediction};
pub use types::{
    brier_loss, vertex_to_probability, Example, Forecaster, LossLedger, PredictionVector,
    ProbabilityVector, Signal, Vertex,
};
