//! Refined AM-GM bounds for weighted samples, Gamma-function analytics for the
//! l1 norm on the Euclidean unit sphere, and seeded Monte Carlo that checks how
//! large the refinement typically is.

#![allow(clippy::excessive_precision)]

pub mod bounds;
pub mod cli;
pub mod gamma;
pub mod output;
pub mod sphere;

pub use bounds::{AmGmReport, BoundsError, WeightedSample};
pub use gamma::{AnalyticRow, GammaError};
pub use output::OutputEnvelope;
pub use sphere::{McConfig, McError, McSummary, SphereVector};
