use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value {value} at grid point ({j}, {k}), z = {z}")]
    NonFinite {
        j: usize,
        k: usize,
        z: Complex64,
        value: Complex64,
    },

    #[error("region contains no usable samples")]
    EmptyRegion,

    #[error("field has excluded points; spectral derivatives need a complete field")]
    ExcludedPoints,

    #[error("support violation: {0}")]
    Support(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("|lambda + S omega| = {modulus:.6e} <= R = {radius} at z = {z}")]
    ArgumentDomain {
        z: Complex64,
        modulus: f64,
        radius: f64,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        rates: Vec<f64>,
    },

    #[error("family member lambda = {lambda} failed: {source}")]
    FamilyMember {
        lambda: Complex64,
        #[source]
        source: Box<Error>,
    },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("s = {s:.6e} lies outside the invertible window [0, {s0:.6e}] (k0 = {k0:.6e})")]
    OutsideWindow { s: f64, s0: f64, k0: f64 },

    #[error("Jacobian is not positive at {count} samples (first at z = {first})")]
    DegenerateJacobian { count: usize, first: Complex64 },

    #[error("malformed CF64 data at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
