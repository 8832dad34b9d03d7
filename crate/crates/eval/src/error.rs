#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    /// Credentials were rejected; retrying cannot help.
    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("backend configuration error: {0}")]
    Config(String),

    #[error("malformed response: {0}")]
    Response(String),
}

impl BackendError {
    /// Errors that stop the whole run rather than one sample.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth(_) | BackendError::Config(_))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] cursorbench_core::Error),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("invalid conversation: {0}")]
    History(String),

    #[error("invalid harness configuration: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),
}
