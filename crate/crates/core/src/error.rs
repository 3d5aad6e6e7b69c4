use thiserror::Error;

/// Errors raised by mesh construction, discretization and the analysis kernels.
#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("degenerate element {element} (signed area {area:e})")]
    DegenerateElement { element: usize, area: f64 },

    #[error("element index {index} out of range ({count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error("flux and scalar spaces live on different meshes")]
    SpaceMismatch,

    #[error("coefficient matrix not positive definite at element {element} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { element: usize, min_eigenvalue: f64 },

    #[error("coefficient matrix not symmetric at element {element} (asymmetry {asymmetry:e})")]
    Asymmetric { element: usize, asymmetry: f64 },

    #[error("missing derivative information: {0}")]
    MissingDerivative(String),

    #[error("Gram matrix is not positive definite: {0}")]
    InvalidGram(String),

    #[error("singular system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("singular constraint system: {0}")]
    SingularConstraint(String),

    #[error("eigensolver did not converge")]
    EigenSolve,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FemError>;
