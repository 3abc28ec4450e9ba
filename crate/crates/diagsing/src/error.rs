use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Config(String),
    #[error("{what} at x = {x} lies outside the open interval (0, {omega_max})")]
    OutsideSegment { what: &'static str, x: f64, omega_max: f64 },
    #[error("z = {0} lies on the cut [0, omega_max]; use the boundary value")]
    OnCut(Complex64),
    #[error("non-finite value at node {index} (omega = {omega})")]
    NonFinite { index: usize, omega: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("no resonance in search window")]
    NoResonance,
    #[error("multiple resonances ({0}) in search window, rectangle must be split")]
    MultipleResonances(usize),
    #[error("pole search did not converge: {0}")]
    PoleSearch(String),
    #[error("resonance on the real axis: |eta(x + i0)| = {value:e} at x = {x}")]
    ResonanceOnAxis { x: f64, value: f64 },
    #[error("time t = {t} exceeds the resolvable maximum T_max = {t_max}")]
    TimeBeyondMax { t: f64, t_max: f64 },
    #[error("analyticity violated: {reason}; offending points: {points:?}")]
    Analyticity { reason: String, points: Vec<Complex64> },
    #[error("ill-conditioned solve (condition estimate {cond:e}): {what}")]
    IllConditioned { what: String, cond: f64 },
    #[error("eigenvalues nearly degenerate: gap {gap:e} between indices {i} and {j}")]
    NearDegenerate { gap: f64, i: usize, j: usize },
    #[error("contract violated: {0}")]
    Contract(String),
}
