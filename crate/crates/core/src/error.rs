use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside supported domain: {0}")]
    Domain(String),
    #[error("Wood anomaly: k^2 = {k2} within {gap:.3e} of lattice eigenvalue |alpha + 2 pi n|^2 at n = {n:?}")]
    WoodAnomaly { k2: f64, gap: f64, n: (i64, i64) },
    #[error("singular kernel evaluation: {0}")]
    Singular(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("ill-conditioned system (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("regime violation: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
