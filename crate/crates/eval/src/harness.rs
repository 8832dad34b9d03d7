//! The multi-turn refinement loop.
//!
//! Turn 1 sends the system prompt, the instruction and the clean screenshot.
//! Every later turn appends the model's previous reply as an assistant turn,
//! then a user turn holding the feedback text and the screenshot with a red
//! cross at the previous prediction, always drawn on a clean copy. A sample
//! stops at its first hit or after `max_turns`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use cursorbench_core::dataset::{read_samples, write_jsonl, Sample};
use cursorbench_core::geometry::{denormalize, distances, hit_test, PixelBox, PixelPoint, Tolerance};
use cursorbench_core::metrics::{aggregate, MetricsSummary};
use cursorbench_core::overlay::{mark, OverlaySpec};
use cursorbench_core::prompts::{extract_decision, feedback_message, FeedbackTemplate, SystemPrompt};
use cursorbench_core::trace::{EvalTrace, TerminalStatus, TurnRecord};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::backend::{Backend, CompletionRequest};
use crate::chat::{history_digest, ChatTurn};
use crate::error::EvalError;

/// Sent instead of feedback when no earlier turn produced a coordinate.
pub const NO_COORDINATE_REMINDER: &str =
    "Your previous reply did not contain a coordinate pair. Answer with the caret position as (x, y) in pixels.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub max_turns: u32,
    pub tolerance_x: f64,
    pub tolerance_y: f64,
    pub system_prompt: SystemPrompt,
    pub feedback_template: FeedbackTemplate,
    /// Samples evaluated concurrently.
    pub parallelism: usize,
    pub save_turn_images: bool,
    pub seed: u64,
    pub overlay: OverlaySpec,
}

impl Default for HarnessConfig {
    /// Tolerances are half a cell of the default editor layout.
    fn default() -> Self {
        Self {
            max_turns: 2,
            tolerance_x: 8.0,
            tolerance_y: 12.0,
            system_prompt: SystemPrompt::default(),
            feedback_template: FeedbackTemplate::default(),
            parallelism: 4,
            save_turn_images: false,
            seed: 0,
            overlay: OverlaySpec::default(),
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.max_turns == 0 {
            return Err(EvalError::Config("max_turns must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(EvalError::Config("parallelism must be at least 1".into()));
        }
        self.tolerance()?;
        self.overlay.validate()?;
        Ok(())
    }

    pub fn tolerance(&self) -> Result<Tolerance, EvalError> {
        Ok(Tolerance::new(self.tolerance_x, self.tolerance_y)?)
    }
}

/// A sample with its decoded screenshot and pixel-frame target.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sample: Sample,
    pub image: Arc<RgbImage>,
    pub target: PixelBox,
}

/// Reads an eval JSONL file; image paths resolve against its directory.
/// Screens shared by several samples are decoded once.
pub fn load_samples(path: &Path) -> Result<Vec<LoadedSample>, EvalError> {
    let parsed = read_samples(path)?;
    if let Some(e) = parsed.errors.first() {
        return Err(EvalError::Core(cursorbench_core::Error::Schema {
            path: path.to_path_buf(),
            message: format!("{} malformed line(s), first at {e}", parsed.errors.len()),
        }));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cache: HashMap<String, Arc<RgbImage>> = HashMap::new();
    parsed
        .items
        .into_iter()
        .map(|sample| {
            let image = match cache.get(&sample.image_path) {
                Some(img) => img.clone(),
                None => {
                    let img = image::open(base.join(&sample.image_path))
                        .map_err(cursorbench_core::Error::from)?
                        .to_rgb8();
                    let img = Arc::new(img);
                    cache.insert(sample.image_path.clone(), img.clone());
                    img
                }
            };
            if image.dimensions() != (sample.image_width, sample.image_height) {
                return Err(EvalError::Config(format!(
                    "sample {}: image is {}x{}, record says {}x{}",
                    sample.id,
                    image.width(),
                    image.height(),
                    sample.image_width,
                    sample.image_height
                )));
            }
            let target = denormalize(&sample.target, sample.image_width, sample.image_height)?;
            Ok(LoadedSample { sample, image, target })
        })
        .collect()
}

/// Target centers by sample id, for mock backends.
pub fn mock_targets(samples: &[LoadedSample]) -> HashMap<String, PixelPoint> {
    samples
        .iter()
        .map(|s| (s.sample.id.clone(), s.target.center()))
        .collect()
}

/// Live state of one sample's dialogue.
pub struct Session<'a> {
    sample: &'a LoadedSample,
    config: &'a HarnessConfig,
    tolerance: Tolerance,
    history: Vec<ChatTurn>,
    turns: Vec<TurnRecord>,
    /// Last parsed prediction; a failed parse leaves it unchanged.
    last_cross: Option<PixelPoint>,
    turn_images: Option<PathBuf>,
}

impl<'a> Session<'a> {
    pub fn new(sample: &'a LoadedSample, config: &'a HarnessConfig) -> Result<Self, EvalError> {
        let system = config
            .system_prompt
            .render(sample.sample.image_width, sample.sample.image_height)?;
        Ok(Self {
            sample,
            config,
            tolerance: config.tolerance()?,
            history: vec![ChatTurn::system(system)],
            turns: Vec::new(),
            last_cross: None,
            turn_images: None,
        })
    }

    /// Writes the image sent at each turn to `dir/<sample id>/turn_<t>.png`.
    pub fn save_images_to(mut self, dir: Option<PathBuf>) -> Self {
        self.turn_images = dir;
        self
    }

    pub fn history(&self) -> &[ChatTurn] {
        &self.history
    }

    pub fn turns(&self) -> &[TurnRecord] {
        &self.turns
    }

    pub fn hit(&self) -> bool {
        self.turns.last().is_some_and(|t| t.hit)
    }

    /// Appends the user turn for the next request.
    fn push_user_turn(&mut self) -> Result<(), EvalError> {
        let clean = self.sample.image.clone();
        let turn = match (self.turns.is_empty(), self.last_cross) {
            (true, _) => ChatTurn::user(self.sample.sample.instruction.clone(), Some(clean)),
            (false, Some(p)) => {
                let (x, y) = p.rounded();
                let marked = mark(&clean, p, &self.config.overlay)?;
                ChatTurn::user(feedback_message(self.config.feedback_template, x, y), Some(Arc::new(marked)))
            }
            (false, None) => ChatTurn::user(NO_COORDINATE_REMINDER, Some(clean)),
        };
        self.history.push(turn);
        Ok(())
    }

    fn save_image(&self, turn: u32) -> Result<(), EvalError> {
        let (Some(dir), Some(img)) = (&self.turn_images, self.history.last().and_then(|t| t.image.as_ref())) else {
            return Ok(());
        };
        let dir = dir.join(&self.sample.sample.id);
        std::fs::create_dir_all(&dir).map_err(|e| EvalError::Core(cursorbench_core::Error::Io { path: dir.clone(), source: e }))?;
        img.save(dir.join(format!("turn_{turn}.png"))).map_err(cursorbench_core::Error::from)?;
        Ok(())
    }

    /// Runs the next turn: turn 1 when nothing has run yet, otherwise a
    /// refinement turn after a miss.
    pub async fn run_turn(&mut self, backend: &dyn Backend) -> Result<&TurnRecord, crate::error::BackendError> {
        let turn_index = self.turns.len() as u32 + 1;
        debug_assert!(!self.hit(), "no turns after a hit");
        self.push_user_turn().map_err(|e| crate::error::BackendError::Config(e.to_string()))?;
        self.save_image(turn_index).map_err(|e| crate::error::BackendError::Config(e.to_string()))?;
        let digest = history_digest(&self.history);
        let started = Instant::now();
        let request = CompletionRequest { sample_id: &self.sample.sample.id, turn: turn_index, history: &self.history };
        let raw = backend.complete(request).await?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let parse = extract_decision(&raw);
        let point = parse.point;
        let (hit, dist_box, dist_center) = match point {
            Some(p) => {
                let d = distances(p, &self.sample.target);
                (hit_test(p, &self.sample.target, self.tolerance), Some(d.to_box), Some(d.to_center))
            }
            None => (false, None, None),
        };
        if point.is_some() {
            self.last_cross = point;
        }
        self.history.push(ChatTurn::assistant(raw));
        self.turns.push(TurnRecord {
            turn_index,
            prompt_messages_digest: digest,
            parse,
            point,
            hit,
            dist_box,
            dist_center,
            latency_ms,
        });
        Ok(self.turns.last().expect("just pushed"))
    }

    pub fn into_trace(self, failure: Option<String>) -> EvalTrace {
        let first_hit_turn = self.turns.iter().find(|t| t.hit).map(|t| t.turn_index);
        let terminal_status = match (&failure, first_hit_turn) {
            (Some(_), _) => TerminalStatus::InfrastructureFailed,
            (None, Some(_)) => TerminalStatus::Hit,
            (None, None) => TerminalStatus::Exhausted,
        };
        EvalTrace {
            sample_id: self.sample.sample.id.clone(),
            granularity: self.sample.sample.granularity,
            turns: self.turns,
            first_hit_turn,
            terminal_status,
            error: failure,
        }
    }
}

/// Runs one sample to its first hit or the turn budget. Transport failures
/// mark the sample as infrastructure-failed; auth and configuration failures
/// abort the run.
pub async fn run_sample(
    sample: &LoadedSample,
    backend: &dyn Backend,
    config: &HarnessConfig,
    turn_images: Option<PathBuf>,
) -> Result<EvalTrace, EvalError> {
    let mut session = Session::new(sample, config)?.save_images_to(turn_images);
    for _ in 0..config.max_turns {
        match session.run_turn(backend).await {
            Ok(record) if record.hit => break,
            Ok(_) => {}
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                tracing::warn!(sample = %sample.sample.id, error = %e, "sample failed");
                return Ok(session.into_trace(Some(e.to_string())));
            }
        }
    }
    Ok(session.into_trace(None))
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// Sorted by sample id.
    pub traces: Vec<EvalTrace>,
    pub metrics: MetricsSummary,
}

/// Evaluates every sample with at most `config.parallelism` in flight. The
/// result does not depend on completion order.
pub async fn evaluate(
    samples: &[LoadedSample],
    backend: Arc<dyn Backend>,
    config: &HarnessConfig,
    turn_images: Option<&Path>,
) -> Result<EvalOutcome, EvalError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(cursorbench_core::Error::EmptyInput.into());
    }
    let permits = Arc::new(Semaphore::new(config.parallelism));
    let config_arc = Arc::new(config.clone());
    let images = if config.save_turn_images { turn_images.map(Path::to_path_buf) } else { None };
    let mut set = JoinSet::new();
    for sample in samples {
        let sample = sample.clone();
        let permits = permits.clone();
        let backend = backend.clone();
        let config = config_arc.clone();
        let images = images.clone();
        set.spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore open");
            run_sample(&sample, backend.as_ref(), &config, images).await
        });
    }
    let mut traces = Vec::with_capacity(samples.len());
    while let Some(joined) = set.join_next().await {
        match joined.expect("sample task panicked") {
            Ok(trace) => traces.push(trace),
            Err(e) => {
                set.abort_all();
                return Err(e);
            }
        }
    }
    traces.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let metrics = aggregate(&traces, config.max_turns)?;
    Ok(EvalOutcome { traces, metrics })
}

pub fn write_traces(path: &Path, traces: &[EvalTrace]) -> Result<(), EvalError> {
    Ok(write_jsonl(path, traces)?)
}

pub fn metrics_json(metrics: &MetricsSummary) -> Result<String, EvalError> {
    let mut s = serde_json::to_string_pretty(metrics).map_err(cursorbench_core::Error::from)?;
    s.push('\n');
    Ok(s)
}
