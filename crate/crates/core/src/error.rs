use std::io;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),

    #[error("exact solution evaluated at its singular point ({x}, {y})")]
    SingularPoint { x: f64, y: f64 },

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("case domain {case:?} does not match mesh domain {mesh:?}")]
    DomainMismatch {
        case: crate::mesh::Domain,
        mesh: crate::mesh::Domain,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("relative residual {0:e} above tolerance after refinement")]
    ResidualTooLarge(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure originated in the linear solver.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SingularSystem(_) | Error::ResidualTooLarge(_) => true,
            Error::Level { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
