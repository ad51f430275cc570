use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },
    #[error("eigendecomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("input row {row} has zero norm; the arc-cosine angle is undefined")]
    ZeroNormInput { row: usize },
    #[error("invalid layer widths: {0}")]
    InvalidWidths(String),
    #[error("training diverged at epoch {epoch}: train MSE {mse:e}")]
    Diverged { epoch: usize, mse: f64 },
    #[error("out-of-sample prediction needs a cross operator and an initial-prediction function")]
    MissingCrossOperator,
    #[error("all residual projection coefficients are zero")]
    AllCoefficientsZero,
    #[error("no upper bracket for the REML root below t = {t:e}")]
    NoUpperBracket { t: f64 },
    #[error("initial prediction vector is numerically zero")]
    ZeroInitialization,
    #[error("projected response is zero")]
    ZeroProjectedResponse,
    #[error("all chi-square weights are zero")]
    AllWeightsZero,
    #[error("characteristic-function inversion failed: {0}")]
    IntegrationFailure(String),
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
}

impl Error {
    /// True for failures of a numerical routine, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::DecompositionFailure(_)
                | Error::Diverged { .. }
                | Error::NoUpperBracket { .. }
                | Error::IntegrationFailure(_)
        )
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
