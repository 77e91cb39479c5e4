use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vectors are based at different points")]
    MismatchedBase,
    #[error("geodesic left the coordinate domain at t = {t:.6}")]
    DomainExit { t: f64 },
    #[error("points are {distance:.6} apart, beyond the working radius {radius:.6}")]
    OutOfRadius { distance: f64, radius: f64 },
    #[error("shooting did not converge after {iterations} iterations (residual {residual:.3e})")]
    ShootingFailed { iterations: usize, residual: f64 },
    #[error("parameter {name} = {value} out of range [0, {max}]")]
    OutOfRange { name: &'static str, value: f64, max: f64 },
    #[error("graph is disconnected: {components} components of sizes {sizes:?}")]
    Disconnected { components: usize, sizes: Vec<usize> },
    #[error("empty boundary")]
    EmptyBoundary,
    #[error("no interior vertices")]
    NoInterior,
    #[error("no boundary vertices: every vertex lies in the region")]
    NoBoundary,
    #[error("field is +inf at the base point")]
    InfiniteAtBase,
    #[error("field is identically +inf")]
    EmptyDomain,
    #[error("(+inf) - (+inf) is undefined")]
    IndeterminateDifference,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("not converged after {sweeps} sweeps (last change {change:.3e})")]
    NotConverged { sweeps: usize, change: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
