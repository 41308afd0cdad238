use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("fields are defined on different grids")]
    GeometryMismatch,

    #[error("kernel support spans {cells:.2} cells on this grid, at least 3 are required")]
    UnresolvableKernel { cells: f64 },

    #[error("particle {index} at {position:?} is outside the admissible domain")]
    ParticleOutOfDomain { index: usize, position: Vec<f64> },

    #[error("interaction kernel {kernel} produced a non-finite value at r={r}, u={u}, m={m}")]
    NonFiniteResult {
        kernel: String,
        r: f64,
        u: f64,
        m: f64,
    },

    #[error("interaction kernel {0} has no exponential decay bound")]
    NoDecayBound(String),

    #[error("field carries mass {mass:e} in the boundary band, periodic extension is invalid")]
    BoundaryMassLeak { mass: f64 },

    #[error("non-finite value in {0}")]
    NonFiniteField(&'static str),

    #[error("ball of radius {radius} around {center:?} leaves the grid")]
    BallOutsideDomain { radius: f64, center: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    /// Stable name of the innermost error variant.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::GeometryMismatch => "GeometryMismatch",
            Error::UnresolvableKernel { .. } => "UnresolvableKernel",
            Error::ParticleOutOfDomain { .. } => "ParticleOutOfDomain",
            Error::NonFiniteResult { .. } => "NonFiniteResult",
            Error::NoDecayBound(_) => "NoDecayBound",
            Error::BoundaryMassLeak { .. } => "BoundaryMassLeak",
            Error::NonFiniteField(_) => "NonFiniteField",
            Error::BallOutsideDomain { .. } => "BallOutsideDomain",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::AtStep { .. } => unreachable!("root skips step annotations"),
        }
    }

    /// Step index carried by the outermost annotation, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }
}
