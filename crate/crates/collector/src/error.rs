use std::net::SocketAddr;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },

    #[error("a request is already in flight")]
    Busy,

    #[error("request timed out after {ms} ms")]
    Timeout { ms: u64 },

    #[error("no renderer client is connected")]
    NoClient,

    #[error("renderer disconnected")]
    Disconnected,

    #[error("renderer reported: {0}")]
    Remote(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl BridgeError {
    /// The connection itself is gone, as opposed to one request failing.
    pub fn is_connection_loss(&self) -> bool {
        matches!(self, BridgeError::NoClient | BridgeError::Disconnected)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error(transparent)]
    Bridge(#[from] BridgeError),

    #[error(transparent)]
    Core(#[from] cursorbench_core::Error),

    #[error("invalid collector configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
