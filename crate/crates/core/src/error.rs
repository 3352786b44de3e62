use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which of the four PMF routes produced a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Conventional,
    Spectral,
    Collider,
    Latent,
}

impl Branch {
    pub const ALL: [Branch; 4] = [
        Branch::Conventional,
        Branch::Spectral,
        Branch::Collider,
        Branch::Latent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Conventional => "conventional",
            Branch::Spectral => "spectral",
            Branch::Collider => "collider",
            Branch::Latent => "latent",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("n = {n} is too large for exact enumeration (maximum {max})")]
    TooLarge { n: usize, max: usize },

    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature under-resolved (mass deviation {deviation:.3e}); refine the rule")]
    QuadratureUnderResolved { deviation: f64 },

    #[error("latent dimension {r} exceeds the supported maximum of {max}")]
    UnsupportedDimension { r: usize, max: usize },

    #[error(
        "conditioning too severe: {accepted} of {proposals} proposals accepted (rate {rate:.3e})"
    )]
    ConditioningTooSevere {
        proposals: u64,
        accepted: u64,
        rate: f64,
    },

    #[error("no data rows")]
    EmptyData,

    #[error("objective is not finite after {halvings} step halvings")]
    NonFiniteObjective { halvings: u32 },

    #[error("{branch} branch failed: {source}")]
    Branch {
        branch: Branch,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by size, rank or resolution limits rather
    /// than bad input.
    pub fn is_limit(&self) -> bool {
        match self {
            Error::TooLarge { .. }
            | Error::UnsupportedDimension { .. }
            | Error::QuadratureUnderResolved { .. }
            | Error::ConditioningTooSevere { .. } => true,
            Error::Branch { source, .. } => source.is_limit(),
            _ => false,
        }
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
