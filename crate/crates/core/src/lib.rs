//! Self-guided quantum tomography and the estimators it is compared
//! against: linear inversion, variance-weighted least squares and a
//! particle-filter Bayesian mean, plus the simulation harness that runs
//! them on random states.

pub mod diagnostics;
pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod quantum;
pub mod sgqt;

pub use diagnostics::{Estimator, LossReport};
pub use ensembles::{EnsembleKind, EnsembleSpec};
pub use error::{Error, Result};
pub use quantum::{DensityMatrix, HermitianBasis, MeasurementRecord, PureState, ThetaVector};
pub use sgqt::{DesignMode, SgqtState, SpsaSchedule};
