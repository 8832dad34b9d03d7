//! System prompts, feedback templates, and coordinate extraction.
//!
//! Prompt texts live in `prompts/` as data files and are embedded at build
//! time. System prompts take `{width}`/`{height}` slots, feedback templates
//! take `{cross_x}`/`{cross_y}`.
//!
//! # Decision pattern
//!
//! [`extract_decision`] accepts a pair of non-negative decimal numbers separated
//! by a comma, wrapped in either parentheses or square brackets, with optional
//! whitespace inside the brackets:
//!
//! ```text
//! [(\[] \s* NUM \s* , \s* NUM \s* [)\]]      NUM = [0-9]+ ( . [0-9]+ )?
//! ```
//!
//! Opening and closing brackets must be of the same kind. Signs, exponents and
//! placeholder letters never match, so `(x,y)` and `(-3,4)` are rejected. When
//! several pairs match, the last one wins.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::geometry::PixelPoint;
use crate::{Error, Result};

const CUSTOM_PLACEHOLDER: &str = "PUT YOUR CUSTOM PROMPT HERE.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemPromptVariant {
    Baseline,
    BaselineCot,
    CursorAware,
    StepByStep,
    Minimal,
    VisualAnchor,
    Custom,
}

impl SystemPromptVariant {
    pub const ALL: [SystemPromptVariant; 7] = [
        SystemPromptVariant::Baseline,
        SystemPromptVariant::BaselineCot,
        SystemPromptVariant::CursorAware,
        SystemPromptVariant::StepByStep,
        SystemPromptVariant::Minimal,
        SystemPromptVariant::VisualAnchor,
        SystemPromptVariant::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SystemPromptVariant::Baseline => "baseline",
            SystemPromptVariant::BaselineCot => "baseline_cot",
            SystemPromptVariant::CursorAware => "cursor_aware",
            SystemPromptVariant::StepByStep => "step_by_step",
            SystemPromptVariant::Minimal => "minimal",
            SystemPromptVariant::VisualAnchor => "visual_anchor",
            SystemPromptVariant::Custom => "custom",
        }
    }

    /// The stored template text, slots unfilled.
    pub fn template(&self) -> &'static str {
        match self {
            SystemPromptVariant::Baseline => include_str!("../prompts/system/baseline.txt"),
            SystemPromptVariant::BaselineCot => include_str!("../prompts/system/baseline_cot.txt"),
            SystemPromptVariant::CursorAware => include_str!("../prompts/system/cursor_aware.txt"),
            SystemPromptVariant::StepByStep => include_str!("../prompts/system/step_by_step.txt"),
            SystemPromptVariant::Minimal => include_str!("../prompts/system/minimal.txt"),
            SystemPromptVariant::VisualAnchor => include_str!("../prompts/system/visual_anchor.txt"),
            SystemPromptVariant::Custom => include_str!("../prompts/system/custom.txt"),
        }
    }
}

impl fmt::Display for SystemPromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemPromptVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown system prompt variant `{s}`")))
    }
}

/// A system prompt choice, with the user text for the `custom` variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPrompt {
    pub variant: SystemPromptVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_text: Option<String>,
}

impl SystemPrompt {
    pub fn new(variant: SystemPromptVariant) -> Self {
        Self {
            variant,
            custom_text: None,
        }
    }

    pub fn custom(text: impl Into<String>) -> Self {
        Self {
            variant: SystemPromptVariant::Custom,
            custom_text: Some(text.into()),
        }
    }

    pub fn render(&self, width: u32, height: u32) -> Result<String> {
        render_system_prompt(self.variant, width, height, self.custom_text.as_deref())
    }
}

impl Default for SystemPrompt {
    fn default() -> Self {
        Self::new(SystemPromptVariant::BaselineCot)
    }
}

fn fill_slots(template: &str, slots: &[(&str, String)]) -> Result<String> {
    let mut out = template.to_owned();
    for (slot, value) in slots {
        out = out.replace(slot, value);
    }
    if let Some((slot, _)) = slots.iter().find(|(slot, _)| out.contains(slot)) {
        return Err(Error::Config(format!("slot {slot} left unfilled")));
    }
    Ok(out)
}

/// Fills `{width}` and `{height}`. `custom_text` replaces the placeholder line of
/// the `custom` variant and must be non-empty there; other variants ignore it.
pub fn render_system_prompt(
    variant: SystemPromptVariant,
    width: u32,
    height: u32,
    custom_text: Option<&str>,
) -> Result<String> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "prompt dimensions must be positive, got {width}x{height}"
        )));
    }
    let mut template = variant.template().to_owned();
    if variant == SystemPromptVariant::Custom {
        let text = custom_text.map(str::trim).unwrap_or_default();
        if text.is_empty() {
            return Err(Error::Config("the custom system prompt needs non-empty text".into()));
        }
        template = template.replacen(CUSTOM_PLACEHOLDER, text, 1);
    }
    fill_slots(
        &template,
        &[("{width}", width.to_string()), ("{height}", height.to_string())],
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackTemplate {
    #[default]
    Baseline,
    Spatial,
}

impl FeedbackTemplate {
    pub const ALL: [FeedbackTemplate; 2] = [FeedbackTemplate::Baseline, FeedbackTemplate::Spatial];

    pub fn name(&self) -> &'static str {
        match self {
            FeedbackTemplate::Baseline => "baseline",
            FeedbackTemplate::Spatial => "spatial",
        }
    }

    pub fn template(&self) -> &'static str {
        match self {
            FeedbackTemplate::Baseline => include_str!("../prompts/feedback/baseline.txt"),
            FeedbackTemplate::Spatial => include_str!("../prompts/feedback/spatial.txt"),
        }
    }

    pub fn render(&self, cross_x: i64, cross_y: i64) -> String {
        render_feedback(*self, cross_x, cross_y)
    }
}

impl fmt::Display for FeedbackTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeedbackTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feedback template `{s}`")))
    }
}

pub fn render_feedback(template: FeedbackTemplate, cross_x: i64, cross_y: i64) -> String {
    template
        .template()
        .replace("{cross_x}", &cross_x.to_string())
        .replace("{cross_y}", &cross_y.to_string())
}

/// `Last attempt: [x, y]`
pub fn last_attempt_line(x: i64, y: i64) -> String {
    format!("Last attempt: [{x}, {y}]")
}

/// User text of a refinement turn: the feedback template followed by the
/// numeric last attempt on its own line.
pub fn feedback_message(template: FeedbackTemplate, cross_x: i64, cross_y: i64) -> String {
    format!(
        "{}\n{}",
        render_feedback(template, cross_x, cross_y),
        last_attempt_line(cross_x, cross_y)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    pub point: Option<PixelPoint>,
    /// Character offsets `[start, end)` of the accepted match.
    pub matched_span: Option<(usize, usize)>,
    pub raw_text: String,
}

impl ParseOutcome {
    pub fn is_parsed(&self) -> bool {
        self.status == ParseStatus::Parsed
    }
}

static DECISION: LazyLock<Regex> = LazyLock::new(|| {
    const NUM: &str = r"([0-9]+(?:\.[0-9]+)?)";
    Regex::new(&format!(
        r"\(\s*{NUM}\s*,\s*{NUM}\s*\)|\[\s*{NUM}\s*,\s*{NUM}\s*\]"
    ))
    .expect("decision pattern compiles")
});

/// Takes the last coordinate pair in `raw_text` as the model's decision.
pub fn extract_decision(raw_text: &str) -> ParseOutcome {
    let last = DECISION.captures_iter(raw_text).last();
    let Some(caps) = last else {
        return ParseOutcome {
            status: ParseStatus::ParseFailure,
            point: None,
            matched_span: None,
            raw_text: raw_text.to_owned(),
        };
    };
    let whole = caps.get(0).expect("group 0 always present");
    let (x, y) = match (caps.get(1), caps.get(2)) {
        (Some(x), Some(y)) => (x, y),
        _ => (caps.get(3).expect("bracket x"), caps.get(4).expect("bracket y")),
    };
    let num = |m: regex::Match<'_>| m.as_str().parse::<f64>().expect("pattern only admits decimals");
    let char_offset = |byte: usize| raw_text[..byte].chars().count();
    ParseOutcome {
        status: ParseStatus::Parsed,
        point: Some(PixelPoint::new(num(x), num(y))),
        matched_span: Some((char_offset(whole.start()), char_offset(whole.end()))),
        raw_text: raw_text.to_owned(),
    }
}
