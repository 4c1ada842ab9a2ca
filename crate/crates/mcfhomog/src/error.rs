use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hypothesis violation: g({point:?}) = {value} is not positive")]
    HypothesisViolation { point: Vec<f64>, value: f64 },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("CFL violation: dt = {dt} exceeds admissible {max}")]
    Cfl { dt: f64, max: f64 },
    #[error("numeric blowup at cell {cell:?}")]
    Blowup { cell: Vec<usize> },
    #[error("step budget exceeded: {steps} steps without reaching T = {target}")]
    Budget { steps: usize, target: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource error: required {required}, available {available} ({what})")]
    Resource { what: String, required: f64, available: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("undecided: {0}")]
    Undecided(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
