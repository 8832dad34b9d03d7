//! Core building blocks for multi-turn cursor-grounding evaluation.
//!
//! The crate is split along the data flow of a run:
//!
//! - [`geometry`] and [`dataset`] fix the coordinate frames and the JSONL schemas.
//! - [`editor`] renders deterministic code-editor screenshots and derives cursor
//!   ground truth in closed form; [`generate`] turns a source corpus into an
//!   evaluation dataset.
//! - [`prompts`] holds the system prompts and feedback templates and extracts
//!   coordinate decisions from model output.
//! - [`overlay`] draws the red cross-hair feedback marker.
//! - [`trace`] and [`metrics`] record per-turn results and aggregate them.

pub mod dataset;
pub mod editor;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod metrics;
pub mod overlay;
pub mod prompts;
pub mod seed;
pub mod trace;

pub use error::{Error, Result};
