//! Interval state estimation for unbalanced three-phase distribution feeders.
//!
//! The pipeline runs from a feeder document and a measurement set to a
//! guaranteed enclosure of the estimator's state:
//!
//! - [`network`] loads and validates radial feeders.
//! - [`truth`] solves power flow and synthesizes measurements.
//! - [`measurement`] turns measurements into interval vectors and weights.
//! - [`estimator`] builds the Jacobian and runs point WLS.
//! - [`ise`] assembles the augmented interval system.
//! - [`solvers`] encloses its solution set.
//! - [`analysis`] compares enclosures against Monte Carlo and truth.
//! - [`case`] runs a case document end to end and writes reports.

pub mod analysis;
pub mod case;
pub mod estimator;
pub mod interval;
pub mod ise;
pub mod measurement;
pub mod network;
pub mod rng;
pub mod solvers;
pub mod truth;

pub use interval::{Interval, IntervalError, IntervalMatrix, IntervalVector};

/// Any failure of the pipeline, tagged with the stage it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("network: {0}")]
    Network(#[from] network::NetworkError),
    #[error("truth: {0}")]
    Truth(#[from] truth::TruthError),
    #[error("measurement: {0}")]
    Measurement(#[from] measurement::MeasurementError),
    #[error("estimator: {0}")]
    Estimator(#[from] estimator::EstimatorError),
    #[error("ise: {0}")]
    Ise(#[from] ise::IseError),
    #[error("solver: {0}")]
    Solver(#[from] solvers::SolverError),
    #[error("analysis: {0}")]
    Analysis(#[from] analysis::AnalysisError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}
