//! Positive harmonic functions, escape probabilities and Green/Martin
//! estimates for singular random walks in the quarter plane.

pub mod cli;
pub mod compensation;
pub mod curve;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod uniformization;
mod roots;
mod sum;

pub use curve::{CramerData, CurveGeometry};
pub use error::{Error, Result};
pub use model::{validate_model, ModelValidationReport, Probability, Rule, Step, StepDistribution};
pub use uniformization::UniformizationParams;
