use thiserror::Error;

use crate::lattice::Face;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain must contain at least one face")]
    EmptyDomain,

    #[error("face list is not edge-connected: {} components {:?}", .components.len(), .components)]
    Disconnected { components: Vec<Vec<Face>> },

    #[error("domain is not simply connected: enclosed holes at {holes:?}")]
    NotSimplyConnected { holes: Vec<Face> },

    #[error("face {0:?} is not a face of the domain")]
    FaceNotInDomain(Face),

    #[error("face {0:?} appears more than once")]
    CoincidentFaces(Face),

    #[error("defect line does not belong to this domain's dual graph: {0}")]
    InvalidDefectLine(String),

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("det(I - P) is not positive; spectral radius of P is not below 1")]
    NonPositiveDeterminant,

    #[error("matrix of dimension {dim} is too large for the dense fallback (limit {limit})")]
    TooLarge { dim: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NonPositiveDeterminant
                | Error::Numerical(_)
                | Error::NonFinite { .. }
                | Error::Io(_)
        )
    }
}
