use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("tensor is not positive definite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("non-positive volume ratio J = {0:e}")]
    NonPositiveJacobian(f64),

    #[error("no volumetric root for pressure {pressure:e}")]
    NoVolumetricRoot { pressure: f64 },

    #[error("local Newton diverged in branch {branch} after {iterations} iterations (residual {residual:e})")]
    LocalNewtonDiverged { branch: usize, iterations: usize, residual: f64 },

    #[error("internal state of branch {branch} left the SPD cone (eigenvalue {min_eigenvalue:e})")]
    StateNotSPD { branch: usize, min_eigenvalue: f64 },

    #[error("global Newton diverged at t = {time} after {iterations} iterations (residual {residual:e})")]
    GlobalNewtonDiverged { time: f64, iterations: usize, residual: f64 },

    #[error("step rejected at t = {time}; retry with dt <= {suggested_dt:e}")]
    StepRejected { time: f64, suggested_dt: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("malformed dataset at line {line}: {message}")]
    Dataset { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
