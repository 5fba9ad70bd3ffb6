use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach relative tolerance {target:.3e} after {levels} levels (last change {last_change:.3e})")]
    Quadrature {
        target: f64,
        levels: u32,
        last_change: f64,
    },

    /// A Cholesky pivot (or a moment bilinear form) cancelled away more
    /// bits than the working precision can afford.
    #[error("conditioning failure in {stage} at index {index}: lost {lost_bits} of {bits} bits")]
    Conditioning {
        stage: &'static str,
        index: usize,
        lost_bits: u32,
        bits: u32,
    },

    #[error("degenerate pivot in the hierarchy iteration at n = {n}, s = {s}")]
    DegeneratePivot { n: usize, s: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("singular state: {0}")]
    Singular(String),

    #[error("series start failed: {0}")]
    SeriesStart(String),
}

impl Error {
    /// True for failures that a retry at higher working precision may cure.
    pub fn is_precision_failure(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Conditioning { .. })
    }
}
