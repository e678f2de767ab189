use thiserror::Error;

/// Errors raised anywhere in the estimation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-binary treatment value `{value}` on row {row}")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("non-numeric value `{value}` in column `{column}` on row {row}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("input contains no data rows")]
    Empty,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("arm {arm} has {have} units but at least {need} are required")]
    ArmTooSmall { arm: u8, have: usize, need: usize },

    #[error("design is rank deficient (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("complete separation detected at iteration {iter} (|coef|max = {norm:.3})")]
    Separation { iter: usize, norm: f64 },

    #[error("Newton iterations did not converge after {iters} steps (score max-norm {grad:.3e})")]
    NotConverged { iters: usize, grad: f64 },

    #[error("information matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{failed} of {reps} replications failed (first error: {first})")]
    TooManyFailures { failed: usize, reps: usize, first: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than by
    /// a numerical failure during estimation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::NonBinaryTreatment { .. }
                | Error::NonNumeric { .. }
                | Error::Empty
                | Error::NonFinite(_)
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch(_)
                | Error::ArmTooSmall { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
