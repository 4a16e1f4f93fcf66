use thiserror::Error;

/// Errors produced by mesh construction, assembly, and solves.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh integrity: {0}")]
    MeshIntegrity(String),

    #[error("configuration: {0}")]
    Configuration(String),

    #[error("singular local system on cell {cell}: smallest pivot {pivot:.3e}")]
    SingularLocal { cell: usize, pivot: f64 },

    #[error("singular global system: {0}")]
    SingularGlobal(String),

    #[error("invalid physical parameters: {0}")]
    Parameters(String),

    #[error("data: {0}")]
    Data(String),

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
