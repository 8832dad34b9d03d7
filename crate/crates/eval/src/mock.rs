//! Deterministic stand-ins for a model.
//!
//! Mocks know each sample's target point through a map handed over by the
//! test fixture; nothing in the conversation reveals it. `feedback_aware`
//! recovers its previous answer only from the latest user text, so it depends
//! on the harness actually writing coordinates into the feedback.

use std::collections::HashMap;

use async_trait::async_trait;
use cursorbench_core::geometry::PixelPoint;
use cursorbench_core::prompts::extract_decision;
use cursorbench_core::seed::rng_for;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendIdentity, CompletionRequest};
use crate::chat::Role;
use crate::error::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    Perfect,
    ConstantOffset,
    SeededNoise,
    FeedbackAware,
    ParseBreaker,
}

impl MockKind {
    pub const ALL: [MockKind; 5] = [
        MockKind::Perfect,
        MockKind::ConstantOffset,
        MockKind::SeededNoise,
        MockKind::FeedbackAware,
        MockKind::ParseBreaker,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MockKind::Perfect => "perfect",
            MockKind::ConstantOffset => "constant_offset",
            MockKind::SeededNoise => "seeded_noise",
            MockKind::FeedbackAware => "feedback_aware",
            MockKind::ParseBreaker => "parse_breaker",
        }
    }
}

impl std::str::FromStr for MockKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MockKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BackendError::Config(format!("unknown mock kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockOracleConfig {
    pub kind: MockKind,
    /// Offset for `constant_offset`, and the first answer of `feedback_aware`.
    pub offset: [f64; 2],
    /// Noise sigma per turn for `seeded_noise`; the last entry repeats.
    pub sigma: Vec<f64>,
    /// Fraction of the remaining error kept each turn by `feedback_aware`.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for MockOracleConfig {
    fn default() -> Self {
        Self { kind: MockKind::Perfect, offset: [0.0, 0.0], sigma: vec![20.0, 10.0], gamma: 0.5, seed: 0 }
    }
}

impl MockOracleConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let fail = |m: String| Err(BackendError::Config(m));
        match self.kind {
            MockKind::ConstantOffset | MockKind::FeedbackAware if !self.offset.iter().all(|v| v.is_finite()) => {
                fail("offset must be finite".into())
            }
            MockKind::SeededNoise if self.sigma.is_empty() || self.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) => {
                fail("sigma needs at least one finite, non-negative entry".into())
            }
            MockKind::FeedbackAware if !(self.gamma > 0.0 && self.gamma < 1.0) => {
                fail(format!("gamma {} not in (0, 1)", self.gamma))
            }
            _ => Ok(()),
        }
    }

    fn sigma_at(&self, turn: u32) -> f64 {
        let i = (turn as usize).saturating_sub(1).min(self.sigma.len().saturating_sub(1));
        self.sigma.get(i).copied().unwrap_or(0.0)
    }
}

pub struct MockBackend {
    config: MockOracleConfig,
    targets: HashMap<String, PixelPoint>,
}

impl MockBackend {
    pub fn new(config: MockOracleConfig, targets: HashMap<String, PixelPoint>) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(Self { config, targets })
    }

    pub fn config(&self) -> &MockOracleConfig {
        &self.config
    }

    fn answer(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let target = *self
            .targets
            .get(request.sample_id)
            .ok_or_else(|| BackendError::Config(format!("no target for sample {}", request.sample_id)))?;
        let c = &self.config;
        let point = match c.kind {
            MockKind::ParseBreaker => {
                return Ok("I cannot tell where the caret belongs, so my answer is (x,y).".into());
            }
            MockKind::Perfect => target,
            MockKind::ConstantOffset => PixelPoint::new(target.x + c.offset[0], target.y + c.offset[1]),
            MockKind::SeededNoise => {
                let sigma = c.sigma_at(request.turn);
                let mut rng = rng_for(c.seed, &format!("mock/{}/{}", request.sample_id, request.turn));
                let normal = Normal::new(0.0, sigma).map_err(|e| BackendError::Config(e.to_string()))?;
                PixelPoint::new(target.x + normal.sample(&mut rng), target.y + normal.sample(&mut rng))
            }
            MockKind::FeedbackAware => {
                let latest_user = request.history.iter().rev().find(|t| t.role == Role::User);
                let previous = if request.turn > 1 {
                    latest_user.and_then(|t| extract_decision(&t.text).point)
                } else {
                    None
                };
                match previous {
                    Some(p) => PixelPoint::new(target.x + c.gamma * (p.x - target.x), target.y + c.gamma * (p.y - target.y)),
                    None => PixelPoint::new(target.x + c.offset[0], target.y + c.offset[1]),
                }
            }
        };
        let (x, y) = (point.x.max(0.0), point.y.max(0.0));
        Ok(format!("The caret goes at ({x}, {y})"))
    }
}

#[async_trait]
impl Backend for MockBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity { kind: "mock".into(), model: self.config.kind.name().into(), endpoint: None }
    }

    async fn complete(&self, request: CompletionRequest<'_>) -> Result<String, BackendError> {
        self.answer(&request)
    }
}
