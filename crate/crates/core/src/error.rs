use num_complex::Complex64;
use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix norm {norm:.3e} exceeds the expm limit")]
    NormTooLarge { norm: f64 },
    #[error("step too coarse: single-step norm {step_norm:.3e} > 1 with {steps} steps")]
    StepTooCoarse { steps: usize, step_norm: f64 },
    #[error("integrand is not finite at z = {0}")]
    SampleOnSingularity(Complex64),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("parameter too large: {0}")]
    ParamTooLarge(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("invalid kernel parameter: {0}")]
    InvalidKernelParam(String),
    #[error("interpolation points are not distinct (min gap {0:.3e})")]
    DegeneratePoints(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("term {index} has a non-Hermitian generator and cannot be selected")]
    NonUnitarySelectTerm { index: usize },
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid shift: {0}")]
    InvalidShift(String),
    #[error("tolerance not met: rel_error {:.3e} > eps {:.3e}", .0.rel_error, .0.epsilon)]
    ToleranceNotMet(Box<SolveReport>),
}
