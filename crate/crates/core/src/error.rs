use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index (0,0,0) is not an eigenbasis index")]
    ZeroMode,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("grid under-resolves requested modes: {0}")]
    UnderResolved(String),
    #[error("A_lambda has a pole at lambda^2 = eps*nu*|k_h|^2")]
    Pole,
    #[error("ambiguous root selection near target {target}: candidates {a} and {b}")]
    AmbiguousRoot { target: String, a: String, b: String },
    #[error("lambda is not a root of det A_lambda (relative residual {0:e})")]
    NotOnVariety(f64),
    #[error("transition matrix is near-singular (|det P| = {0:e})")]
    SingularTransition(f64),
    #[error("incompatible traces: {0}")]
    Incompatible(String),
    #[error("resonant source entry at mu = {mu}, l = {l}")]
    ResonantSource { mu: f64, l: String },
    #[error("resolution requirement violated: {0}")]
    Resolution(String),
    #[error("singular saddle system at pivot {0}")]
    SingularSystem(usize),
    #[error("regression needs at least 3 positive points: {0}")]
    Regression(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
