use thiserror::Error;

/// Errors shared by the grid types, solvers and planners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field formula produced NaN at node ({i}, {j})")]
    NonFiniteNode { i: usize, j: usize },

    #[error("node ({i}, {j}) out of range for a {nx}x{ny} grid")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        nx: usize,
        ny: usize,
    },

    #[error("point ({x}, {y}) lies outside the grid bounding box")]
    PointOutOfBounds { x: f64, y: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no source snaps to a node inside the domain mask")]
    NoSourceInside,

    #[error("{what} must be positive inside the domain, found {value} at node ({i}, {j})")]
    NonPositiveField {
        what: &'static str,
        value: f64,
        i: usize,
        j: usize,
    },

    #[error("gradient descent stagnated at ({x}, {y})")]
    Stagnation { x: f64, y: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("domain mask has no inside nodes")]
    EmptyMask,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
