use thiserror::Error;

/// Errors raised by the numeric kernels and the lower-bound pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("rejection sampling exhausted {attempts} draws while filling region {region}")]
    RejectionBudget { region: usize, attempts: usize },

    #[error("encoder kind mismatch: {0}")]
    KindMismatch(String),

    #[error("encoder is not affine; the exact linear oracle does not apply")]
    NotAffine,

    #[error("fingerprint mismatch for {what}: expected {expected}, got {got}")]
    FingerprintMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("degenerate certificate: {0}")]
    DegenerateCertificate(String),

    #[error("certificate failed verification: {0}")]
    Verification(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
