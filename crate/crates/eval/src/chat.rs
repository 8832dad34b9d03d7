//! Conversation model sent to backends.

use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    pub image: Option<Arc<RgbImage>>,
}

impl ChatTurn {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into(), image: None }
    }

    pub fn user(text: impl Into<String>, image: Option<Arc<RgbImage>>) -> Self {
        Self { role: Role::User, text: text.into(), image }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into(), image: None }
    }
}

/// One system turn, first; images only on user turns.
pub fn validate_history(history: &[ChatTurn]) -> Result<(), EvalError> {
    match history.first() {
        Some(t) if t.role == Role::System => {}
        _ => return Err(EvalError::History("history must start with the system turn".into())),
    }
    if history.iter().filter(|t| t.role == Role::System).count() != 1 {
        return Err(EvalError::History("exactly one system turn allowed".into()));
    }
    if let Some(t) = history.iter().find(|t| t.image.is_some() && t.role != Role::User) {
        return Err(EvalError::History(format!("{} turn carries an image", t.role.as_str())));
    }
    Ok(())
}

/// SHA-256 over roles, texts and raw image pixels, in order.
pub fn history_digest(history: &[ChatTurn]) -> String {
    let mut h = Sha256::new();
    for turn in history {
        h.update(turn.role.as_str().as_bytes());
        h.update((turn.text.len() as u64).to_le_bytes());
        h.update(turn.text.as_bytes());
        match &turn.image {
            Some(img) => {
                h.update([1u8]);
                h.update(img.width().to_le_bytes());
                h.update(img.height().to_le_bytes());
                h.update(img.as_raw());
            }
            None => h.update([0u8]),
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
