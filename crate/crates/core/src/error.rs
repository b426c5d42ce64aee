use std::path::PathBuf;

/// Errors raised by the solvers, builders and the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("biaxiality undefined for |Q| = {norm:e} (below {tol:e})")]
    UndefinedBiaxiality { norm: f64, tol: f64 },

    #[error("non-finite value detected at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("reflected saddle is not a critical point: residual {residual:e} at node ({x}, {y})")]
    ReflectionInconsistency { x: f64, y: f64, residual: f64 },

    #[error("field is off the planar manifold: deviation {deviation:e} at node {node}")]
    NotOnPlanarManifold { node: usize, deviation: f64 },

    #[error("{what} failed after {iterations} iterations (residual {residual:e})")]
    Solver {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("no bifurcation in range: the probe never crosses {threshold}")]
    NoBifurcationInRange { threshold: f64 },

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
