use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("boundary configuration: {0}")]
    Boundary(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("nonphysical state: {0}")]
    Nonphysical(String),

    #[error("no equilibrium root: {detail} (residual {residual:.3e})")]
    NoRoot { detail: String, residual: f64 },

    #[error("equilibrium solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("node {index}: {source}")]
    AtNode {
        index: isize,
        #[source]
        source: Box<Error>,
    },

    #[error("interface {index}+1/2: {source}")]
    AtInterface {
        index: isize,
        #[source]
        source: Box<Error>,
    },

    #[error("Runge-Kutta stage {stage} at t = {time}: {source}")]
    Stage {
        stage: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in component {component} at node {index}")]
    NonFinite { index: isize, component: usize },

    #[error("config {key}: {message}")]
    Config { key: String, message: String },

    #[error("{}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
