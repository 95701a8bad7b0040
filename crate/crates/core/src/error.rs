use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported wavelet family K = {0} (supported: 1..=10)")]
    UnsupportedFamily(usize),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("cascade did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable mass parameter: mu^2 = {mu2} < 2d = {bound}")]
    Unstable { mu2: f64, bound: f64 },

    #[error("infrared: zero mode has vanishing frequency and is not excluded")]
    Infrared,

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("the Haar scaling function is not in H^1/2; the momentum block diverges")]
    Sobolev,

    #[error("momentum cutoff exhausted: tail estimate {tail:e} above tolerance {tol:e} at |k| <= {cutoff}")]
    Cutoff { tail: f64, tol: f64, cutoff: f64 },

    #[error("fit error: {0}")]
    Fit(String),
}
