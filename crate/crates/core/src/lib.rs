//! Future-state prediction for disturbed LTI systems.
//!
//! Given `ẋ = Ax + B_u u(t−h) + B_ω ω(t)` with an unknown but smooth
//! disturbance, this crate predicts `x(t+T)` through a high-order augmented
//! Luenberger observer, certifies observer gains against D-region and
//! decay-rate matrix-inequality conditions, computes a-priori prediction
//! error bounds, and benchmarks the approach against two baseline
//! predictors in a closed-loop simulation lab.
//!
//! The `parallel` feature (default) runs the gain-candidate search and
//! frequency sweeps on the rayon thread pool; disabling it falls back to
//! sequential evaluation with identical results.

pub mod baselines;
pub mod error;
pub mod gain;
pub mod matseries;
pub mod model;
pub mod observer;
pub mod predictor;
pub mod simlab;

pub use error::{Error, Result};
pub use matseries::SeriesOptions;
pub use model::{AugmentedModel, ControlSchedule, DisturbanceSignal, LtiModel};
