use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 16")]
    GridSize(usize),

    #[error("degenerate interval [{x_min}, {x_max}]")]
    DegenerateInterval { x_min: f64, x_max: f64 },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("sample length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    DerivativeOrder { order: usize, max: usize },

    #[error("beta must be nonzero")]
    ZeroBeta,

    #[error("|omega| < 3 beta is required (omega = {omega}, beta = {beta})")]
    SmoothingCondition { omega: f64, beta: f64 },

    #[error(
        "domain length {length} does not quantize the gauge modulation d2 = {d2}; \
         the length must be a multiple of {required}"
    )]
    GaugeIncompatible { length: f64, d2: f64, required: f64 },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("field is identically zero")]
    ZeroField,

    #[error("inadmissible Gagliardo-Nirenberg exponents: {0}")]
    Exponents(String),

    #[error("time step {dt} exceeds the explicit stability bound {bound}; use dt <= {bound}")]
    Stability { dt: f64, bound: f64 },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("boundary guard tripped at t = {time}: edge/max ratio {ratio:e} exceeds {limit:e}")]
    BoundaryGuard { time: f64, ratio: f64, limit: f64 },

    #[error("solution became non-finite at t = {time}")]
    Blowup { time: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
