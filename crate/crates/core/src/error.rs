use thiserror::Error;

/// Errors produced by the domain, calculus, solver and report layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry spec: {0}")]
    InvalidSpec(String),

    #[error("voxel mask is empty (shape thinner than the resolution h)")]
    EmptyMask,

    #[error("voxel mask is disconnected: {components} face-connected components")]
    Disconnected { components: usize },

    #[error("empty slab: axis {axis} interval [{alpha}, {beta}] contains no occupied cell")]
    EmptySlab { axis: usize, alpha: f64, beta: f64 },

    #[error("invalid interval on axis {axis}: [{alpha}, {beta}] not within [0, {extent}]")]
    InvalidInterval {
        axis: usize,
        alpha: f64,
        beta: f64,
        extent: f64,
    },

    #[error(
        "{cells} cells along axis {axis} cannot be split into {requested} uniform slabs; nearest valid N is {suggestion}"
    )]
    IndivisibleDecomposition {
        axis: usize,
        cells: usize,
        requested: usize,
        suggestion: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("flavor mismatch: {0}")]
    FlavorMismatch(String),

    #[error("hypothesis requires vanishing {0} trace")]
    WrongFlavor(&'static str),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("input is not divergence free (relative divergence {0:e})")]
    NotDivergenceFree(f64),

    #[error("harmonic obstruction: field has a harmonic component of relative size {0:e}")]
    HarmonicObstruction(f64),

    #[error("domain is not flagged convex; constant estimates are refused")]
    NotConvex,

    #[error("trace condition violated on {0}")]
    TraceViolated(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
