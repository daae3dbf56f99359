use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// A column of the mis-declaration tally has no observations and no smoothing mass.
    #[error("mis-declaration column for region {region} is empty and smoothing is zero")]
    DegenerateColumn { region: String },

    /// The objective is infinite at the supplied starting point.
    #[error("objective is not finite at the starting point; re-initialize theta")]
    Diverged,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                actual,
            })
        }
    }
}
