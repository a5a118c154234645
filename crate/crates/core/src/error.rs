use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("momentum n = {0:?} is off the truncated lattice")]
    OffGrid(Vec<i32>),

    #[error("non-finite {field} at lattice point n = {n:?} (step {step})")]
    NonFinite {
        field: &'static str,
        n: Vec<i32>,
        step: usize,
    },

    #[error("gamma = {value:e} < -1e-12 at lattice point n = {n:?} (step {step})")]
    NegativeGamma { value: f64, n: Vec<i32>, step: usize },

    #[error("1 + gamma = {value:e} <= 0 at lattice point n = {n:?}")]
    Division { value: f64, n: Vec<i32> },

    #[error("energy functional has imaginary part {imag:e} (scale {scale:e})")]
    ComplexEnergy { imag: f64, scale: f64 },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("quartic operator needs ~{estimate:.3e} kernel operations, budget is {budget:.3e}")]
    Budget { estimate: f64, budget: f64 },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
