use thiserror::Error;

/// Errors raised while building or solving an unfitted discretization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("level set is non-finite at vertex {vertex} ({x}, {y})")]
    NonFiniteLevelSet { vertex: usize, x: f64, y: f64 },

    #[error("level set does not intersect the mesh: active set is empty")]
    EmptyActiveSet,

    #[error("deformation root not bracketed in [-h/2, h/2] at node ({x}, {y})")]
    RootNotBracketed { x: f64, y: f64 },

    #[error("element {element} is inverted (det = {det:e})")]
    ElementInversion { element: usize, det: f64 },

    #[error("displacement {magnitude:e} exceeds h/2 at node {node}")]
    DisplacementTooLarge { node: usize, magnitude: f64 },

    #[error("local Piola transform of element {element} is ill-conditioned (cond = {cond:e})")]
    IllConditionedTransform { element: usize, cond: f64 },

    #[error("degenerate extended Jacobian {value:e} on ghost-penalty patch of facet {facet}")]
    DegenerateJacobian { facet: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system (pivot {pivot})")]
    SingularSystem { pivot: usize },

    #[error("residual {residual:e} above tolerance after refinement")]
    ResidualTooLarge { residual: f64 },

    #[error("{what} did not converge after {iterations} iterations (last estimate {last:e})")]
    NoConvergence { what: &'static str, iterations: usize, last: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
