use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::chat::ChatTurn;
use crate::error::BackendError;

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub sample_id: &'a str,
    /// 1-based turn being requested.
    pub turn: u32,
    pub history: &'a [ChatTurn],
}

/// Who answered, without credentials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIdentity {
    pub kind: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn identity(&self) -> BackendIdentity;

    /// Returns the model's raw text for the conversation so far.
    async fn complete(&self, request: CompletionRequest<'_>) -> Result<String, BackendError>;
}
