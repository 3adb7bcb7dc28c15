use thiserror::Error;

/// Errors produced by the numerical and quantization layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {0} is not a half-integer")]
    NotHalfInteger(f64),

    #[error("quadrature grid sizes must be positive (got n_theta={n_theta}, n_phi={n_phi})")]
    EmptyGrid { n_theta: usize, n_phi: usize },

    #[error("matrix is not Hermitian: max |A - A*| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("band limit {band_limit} exceeds quadrature exactness {exactness}; need n_theta >= {required_theta} and n_phi >= {required_phi}")]
    QuadratureTooCoarse {
        band_limit: usize,
        exactness: usize,
        required_theta: usize,
        required_phi: usize,
    },

    #[error("harmonic (l={l}, m={m}) is invalid for spin weight {spin}")]
    InvalidHarmonic { spin: f64, l: f64, m: f64 },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("ambiguous kernel at N={n}: eigenvalues {below:e} and {above:e} straddle threshold {threshold:e} without a clear gap")]
    AmbiguousKernel {
        n: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },

    #[error("eigenvalue {eigenvalue} of the quantized symbol at N={n} lies within {gap_tol:e} of 1/2")]
    NoIdempotentGap { n: usize, eigenvalue: f64, gap_tol: f64 },

    #[error("symbol is not an idempotent: max |e^2 - e| = {deviation:e}")]
    NotIdempotent { deviation: f64 },

    #[error("morphism is not covariantly constant: {0}")]
    NotCovariantlyConstant(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
