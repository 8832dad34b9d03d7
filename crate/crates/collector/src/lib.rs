//! Cursor-position collection over a loopback WebSocket bridge.
//!
//! The extension-host side ([`bridge`]) serves one renderer client and issues
//! one request at a time. [`renderer`] is an in-process stand-in for the editor
//! window that answers from the synthetic editor layout. [`collect`] walks a
//! file one caret stop at a time and writes collection JSONL.

pub mod bridge;
pub mod collect;
pub mod config;
pub mod error;
pub mod model;
pub mod protocol;
pub mod renderer;

pub use bridge::{serve_bridge, BridgeHandle};
pub use collect::{collect_file, run_collection, CollectOutcome, CollectionJob, FileSummary};
pub use config::CollectorConfig;
pub use error::{BridgeError, CollectError};
pub use model::{CursorView, EditorModel};
pub use renderer::{measure_cursor, spawn_renderer, FaultPlan, RendererConfig, RendererHandle};
