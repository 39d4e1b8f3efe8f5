use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("radius {radius} (|x|^2 = {radius_sq}) lies outside the metric domain |x| < {limit}")]
    OutOfDomain { radius: f64, radius_sq: f64, limit: f64 },

    #[error("profile radius x = {x} is not positive; the rotation axis is singular")]
    SingularAxis { x: f64 },

    #[error("potential sigma = {sigma} is not positive at |x|^2 = {radius_sq}")]
    NonPositiveSigma { sigma: f64, radius_sq: f64 },

    #[error("integration tolerance {tol} could not be met near parameter {at}")]
    ToleranceUnachievable { tol: f64, at: f64 },

    #[error("no sign change on [{lo}, {hi}]; sampled values: {samples:?}")]
    NoRoot { lo: f64, hi: f64, samples: Vec<(f64, f64)> },

    #[error("quadrature did not reach tolerance {tol} (estimated error {estimate})")]
    QuadratureFailed { tol: f64, estimate: f64 },

    #[error("value {value} lies outside the table range [{lo}, {hi}]")]
    OutOfTable { value: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
