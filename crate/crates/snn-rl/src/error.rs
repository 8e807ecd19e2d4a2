use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnnError {
    /// Non-finite value appeared during simulation.
    #[error("simulation fault: {context} (index {index})")]
    SimFault { context: &'static str, index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// Input feature outside [0, 1] handed to the Bernoulli spike coder.
    #[error("encoding fault: feature {index} = {value} outside [0, 1]")]
    Encoding { index: usize, value: f64 },

    /// Episode protocol misuse, e.g. stepping a finished environment.
    #[error("protocol fault: {0}")]
    Protocol(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SnnError>;
