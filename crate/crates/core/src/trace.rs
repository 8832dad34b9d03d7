//! Per-sample transcripts of the refinement loop.

use serde::{Deserialize, Serialize};

use crate::dataset::Granularity;
use crate::geometry::PixelPoint;
use crate::prompts::ParseOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based.
    pub turn_index: u32,
    /// SHA-256 over the exact request history (texts and image pixels).
    pub prompt_messages_digest: String,
    pub parse: ParseOutcome,
    pub point: Option<PixelPoint>,
    pub hit: bool,
    /// `None` on parse failure.
    pub dist_box: Option<f64>,
    pub dist_center: Option<f64>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Hit,
    Exhausted,
    /// The backend could not be reached; the sample is left out of the metrics.
    InfrastructureFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTrace {
    pub sample_id: String,
    pub granularity: Granularity,
    pub turns: Vec<TurnRecord>,
    pub first_hit_turn: Option<u32>,
    pub terminal_status: TerminalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalTrace {
    /// Checks the early-stopping shape: turns numbered 1..=n, nothing after
    /// the first hit, and `first_hit_turn`/`terminal_status` agreeing with the
    /// turns.
    pub fn is_well_formed(&self, max_turns: u32) -> bool {
        if self.turns.len() > max_turns as usize {
            return false;
        }
        if self
            .turns
            .iter()
            .enumerate()
            .any(|(i, t)| t.turn_index != i as u32 + 1 || (t.hit && !t.parse.is_parsed()))
        {
            return false;
        }
        let first_hit = self.turns.iter().position(|t| t.hit).map(|i| i as u32 + 1);
        match self.terminal_status {
            TerminalStatus::Hit => {
                first_hit.is_some()
                    && first_hit == self.first_hit_turn
                    && first_hit == Some(self.turns.len() as u32)
            }
            TerminalStatus::Exhausted => {
                first_hit.is_none() && self.first_hit_turn.is_none() && self.turns.len() == max_turns as usize
            }
            TerminalStatus::InfrastructureFailed => first_hit.is_none() && self.first_hit_turn.is_none(),
        }
    }
}
