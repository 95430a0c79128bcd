use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("vertex ({x}, {y}) lies outside V_{n}")]
    OutsideBox { x: i64, y: i64, n: usize },

    #[error("neighborhood of ({x}, {y}) with side {side} is clipped by the boundary of V_{n}")]
    Clipped {
        x: i64,
        y: i64,
        side: usize,
        n: usize,
    },

    #[error("region is empty")]
    EmptyRegion,

    #[error("N = {n} exceeds the dense-matrix limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
