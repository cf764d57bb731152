use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("frequency {omega} lies outside the band [{lo}, {hi}]")]
    OutOfBand { omega: f64, lo: f64, hi: f64 },
    #[error("principal-value routes disagree at omega = {omega}: {a} vs {b}")]
    NonConvergence { omega: f64, a: f64, b: f64 },
    #[error("evaluation point {z} hits the level {level}")]
    PoleHit { z: Complex64, level: f64 },
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    SingularMatrix { residual: f64 },
    #[error("grid too coarse: doubling the grid changes the current from {coarse:e} to {fine:e}")]
    GridTooCoarse { coarse: f64, fine: f64 },
    #[error("bound state: |Lambda(omega)| = {abs_lambda:e} at omega = {omega}")]
    BoundState { omega: f64, abs_lambda: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{modes} modes requested; the Fock oracle supports at most 8")]
    TooManyModes { modes: usize },
    #[error("|lambda| = {lambda_abs} is not outside the disk of radius {norm}")]
    OutsideDisk { lambda_abs: f64, norm: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositive { min_eig: f64 },
    #[error("series did not converge within {terms} terms")]
    SlowConvergence { terms: usize },
    #[error("norm rescaling under/overflowed")]
    Overflow,
    #[error("Dyson order {order} exceeds the truncation budget")]
    TruncationBudget { order: usize },
    #[error("t_max = {t_max} exceeds the recurrence limit {limit}")]
    RecurrenceRisk { t_max: f64, limit: f64 },
    #[error("integral-equation residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
