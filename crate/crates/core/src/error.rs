//! Errors from every stage, with module-qualified codes and exit codes.

use thiserror::Error;

use crate::dp::DpError;
use crate::laplace::LaplaceError;
use crate::mc::McError;
use crate::model::ModelError;
use crate::oned::OneDimError;
use crate::seqlab::SeqError;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    OneDim(#[from] OneDimError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// `module/Variant`, e.g. `walk-model/WeightsNotNormalized`.
    pub fn code(&self) -> String {
        let (module, variant) = match self {
            Self::Model(e) => ("walk-model", e.code()),
            Self::Laplace(e) => ("laplace", e.code()),
            Self::Dp(DpError::Laplace(e)) => ("laplace", e.code()),
            Self::Dp(e) => ("exact-dp", e.code()),
            Self::OneDim(e) => ("oned", e.code()),
            Self::Seq(e) => ("seqlab", e.code()),
            Self::Mc(McError::Laplace(e)) => ("laplace", e.code()),
            Self::Mc(e) => ("mc", e.code()),
            Self::Io { .. } => ("cli", "Io"),
            Self::Usage(_) => ("cli", "Usage"),
        };
        format!("{module}/{variant}")
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Model(ModelError::HorizonTooLarge { .. }) | Self::Dp(DpError::MemoryBudgetExceeded { .. }) => {
                EXIT_RESOURCE
            }
            Self::Model(_)
            | Self::Usage(_)
            | Self::OneDim(_)
            | Self::Seq(SeqError::InsufficientTerms { .. })
            | Self::Dp(
                DpError::UnsupportedCone
                | DpError::PointOutsideCone(_)
                | DpError::NotSmallStep
                | DpError::DriftNotInterior
                | DpError::Trapped,
            )
            | Self::Mc(McError::NoSamples | McError::DriftNotInterior) => EXIT_VALIDATION,
            _ => EXIT_FAILURE,
        }
    }
}
