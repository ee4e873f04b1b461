use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("transport i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("protocol desync: expected tag {expected:?}, got {got:?}")]
    Desync { expected: u8, got: u8 },

    #[error("connection closed")]
    Closed,

    #[error("state error: {0}")]
    State(String),

    #[error("handshake error: {0}")]
    Handshake(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error at layer {layer}: {msg}")]
    Validation { layer: usize, msg: String },

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("noise budget exhausted: {0}")]
    NoiseBudget(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
