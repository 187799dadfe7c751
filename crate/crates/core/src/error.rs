use thiserror::Error;

use crate::chart::Point;

/// Errors raised by the geometry, field, and verification pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies on the singular locus {locus} of chart `{chart}`")]
    SingularPoint {
        chart: &'static str,
        locus: String,
        point: Point,
    },

    #[error("point {point:?} is outside the domain of chart `{chart}`")]
    OutOfDomain { chart: &'static str, point: Point },

    #[error("finite-difference stencil of width {width:e} in coordinate {coord} leaves chart `{chart}` at {point:?}")]
    StepTooLarge {
        chart: &'static str,
        coord: usize,
        width: f64,
        point: Point,
    },

    #[error("differential is rank deficient at {point:?} (sigma2 = {sigma2:e})")]
    RankDeficient { point: Point, sigma2: f64 },

    #[error("quadrature refinements do not converge (levels: {levels:?})")]
    QuadratureDivergence { levels: Vec<f64> },

    #[error("profile endpoints ({start}, {end}) are not in {{0, pi}}")]
    InadmissibleProfile { start: f64, end: f64 },

    #[error("no admissible scale factor in (0, {a_max}]: {reason}")]
    NoAdmissibleScale { a_max: f64, reason: String },

    #[error("separated profile integrand changes sign: {0}")]
    NonMonotoneProfile(String),

    #[error("Hopf charge vanishes, bound ratio undefined")]
    ZeroCharge,

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("case `{case}`: {source}")]
    Case { case: String, source: Box<Error> },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn in_case(self, case: &str) -> Error {
        Error::Case {
            case: case.to_string(),
            source: Box::new(self),
        }
    }

    /// Innermost error with any case context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Case { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
