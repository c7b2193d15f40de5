use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Stage of the identification pipeline an error originated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cycling,
    SubspaceIdentification,
    AssumptionCheck,
    Transformation,
    Projection,
    Extraction,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Cycling => "cycling",
            Stage::SubspaceIdentification => "subspace identification",
            Stage::AssumptionCheck => "assumption check",
            Stage::Transformation => "transformation",
            Stage::Projection => "structural projection",
            Stage::Extraction => "extraction",
        };
        f.write_str(s)
    }
}

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Io,
    Validation,
    Identification,
    Structure,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model rejected: {0}")]
    Validation(String),

    #[error("plant generation failed after {attempts} attempts")]
    Generation { attempts: usize },

    #[error(
        "{matrix} violates its block pattern: worst block ({block_row}, {block_col}) \
         has off-pattern norm {norm:.3e} (relative residual {residual:.3e} > tol {tol:.1e})"
    )]
    Structure {
        matrix: String,
        block_row: usize,
        block_col: usize,
        norm: f64,
        residual: f64,
        tol: f64,
    },

    #[error("selector yields a rank-deficient X_{phase} (rank {rank} < {expected})")]
    Selector {
        phase: usize,
        rank: usize,
        expected: usize,
    },

    #[error("transformation matrix is singular or ill-conditioned (condition number {condition:.3e}, cap {cap:.1e})")]
    SingularTransformation { condition: f64, cap: f64 },

    #[error("data carries no excitation (all singular values are zero)")]
    NoExcitation,

    #[error("identification failed: {0}")]
    Identification(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Argument(_) => ErrorClass::Argument,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => ErrorClass::Io,
            Error::Dimension(_) | Error::Validation(_) | Error::Generation { .. } => {
                ErrorClass::Validation
            }
            Error::Selector { .. }
            | Error::SingularTransformation { .. }
            | Error::NoExcitation
            | Error::Identification(_) => ErrorClass::Identification,
            Error::Structure { .. } => ErrorClass::Structure,
            Error::Stage { source, .. } => source.class(),
        }
    }

    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
