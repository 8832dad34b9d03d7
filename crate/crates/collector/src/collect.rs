//! Per-character traversal of one file.
//!
//! The caret starts at the top of the file and moves one stop at a time with
//! `cursor_right`. Every newly reached stop is measured after the settle
//! delay. Traversal ends when the same position has been observed
//! `eof_repeat_threshold` times in a row.

use std::path::{Path, PathBuf};
use std::time::Duration;

use cursorbench_core::dataset::{write_collection, CollectionFile, CursorRecord, DatasetHeader, TruncationMarker, WindowGeometry};
use cursorbench_core::editor::{self, EditorLayout, FONT_FAMILY};
use serde::Serialize;
use serde_json::json;

use crate::bridge::{serve_bridge, BridgeHandle};
use crate::config::CollectorConfig;
use crate::error::{BridgeError, CollectError};
use crate::model::{CursorView, EditorModel};
use crate::protocol::{CursorBox, Method, WindowMetadata};
use crate::renderer::{spawn_renderer, RendererConfig};

#[derive(Debug, Clone)]
pub struct CollectOutcome {
    pub file: CollectionFile,
    /// Stops whose measurement failed and were skipped.
    pub failed_steps: Vec<CursorView>,
    /// Times the file was restarted after a reconnect.
    pub restarts: u32,
}

enum Pass {
    Done(CollectOutcome),
    /// The connection dropped; `partial` holds what the pass had gathered.
    Lost { partial: CollectOutcome, err: BridgeError },
}

/// Collects one file through a connected bridge.
#[allow(clippy::too_many_arguments)]
pub async fn collect_file(
    bridge: &BridgeHandle,
    editor: &mut EditorModel,
    config: &CollectorConfig,
    layout: &EditorLayout,
    file_id: &str,
    text: &str,
    screenshot_path: &str,
) -> Result<CollectOutcome, CollectError> {
    config.validate()?;
    let mut restarts = 0;
    let mut generation = bridge.wait_for_client(0, config.connect_timeout()).await?;
    loop {
        editor.load(text);
        match pass(bridge, editor, config, layout, file_id, text, screenshot_path).await? {
            Pass::Done(mut outcome) => {
                outcome.restarts = restarts;
                return Ok(outcome);
            }
            Pass::Lost { mut partial, err } => {
                if restarts < config.max_restarts {
                    if let Ok(g) = bridge.wait_for_client(generation, config.connect_timeout()).await {
                        restarts += 1;
                        generation = g;
                        tracing::info!(file_id, restarts, "renderer reconnected, restarting file");
                        continue;
                    }
                }
                tracing::warn!(file_id, error = %err, "bridge lost, keeping partial file");
                partial.file.truncation = Some(TruncationMarker { truncated: true, reason: err.to_string() });
                partial.restarts = restarts;
                return Ok(partial);
            }
        }
    }
}

fn header(meta: &WindowMetadata, config: &CollectorConfig, layout: &EditorLayout, text: &str, screenshot_path: &str) -> DatasetHeader {
    DatasetHeader {
        file_content: text.to_string(),
        char_count: DatasetHeader::count_chars(text),
        font_family: FONT_FAMILY.to_string(),
        font_size: f64::from(layout.glyph_px()),
        line_height: f64::from(layout.line_height),
        settle_delay_ms: config.settle_delay_ms,
        window_geometry: WindowGeometry {
            screen_x: meta.screen_x,
            screen_y: meta.screen_y,
            width: meta.width,
            height: meta.height,
        },
        screenshot_path: screenshot_path.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    }
}

#[allow(clippy::too_many_arguments)]
async fn pass(
    bridge: &BridgeHandle,
    editor: &EditorModel,
    config: &CollectorConfig,
    layout: &EditorLayout,
    file_id: &str,
    text: &str,
    screenshot_path: &str,
) -> Result<Pass, CollectError> {
    let meta: WindowMetadata = match bridge.request(Method::GetWindowMetadata, json!({})).await {
        Ok(v) => serde_json::from_value(v).map_err(|e| BridgeError::Protocol(e.to_string()))?,
        Err(e) if e.is_connection_loss() => {
            let meta = WindowMetadata {
                screen_x: config.window_screen_x,
                screen_y: config.window_screen_y,
                width: f64::from(layout.image_width),
                height: f64::from(layout.image_height),
                device_pixel_ratio: config.device_pixel_ratio,
            };
            let partial = outcome(header(&meta, config, layout, text, screenshot_path), Vec::new(), Vec::new());
            return Ok(Pass::Lost { partial, err: e });
        }
        Err(e) => return Err(e.into()),
    };
    let header = header(&meta, config, layout, text, screenshot_path);
    let mut records = Vec::new();
    let mut failed_steps = Vec::new();
    let mut last: Option<CursorView> = None;
    let mut repeats = 0;
    loop {
        let pos = editor.position();
        if last == Some(pos) {
            repeats += 1;
            if repeats >= config.eof_repeat_threshold {
                break;
            }
            editor.cursor_right();
            continue;
        }
        last = Some(pos);
        repeats = 1;

        tokio::time::sleep(config.settle_delay()).await;
        match bridge.request(Method::GetCursorPosition, json!({})).await {
            Ok(v) => {
                let b: CursorBox = serde_json::from_value(v).map_err(|e| BridgeError::Protocol(e.to_string()))?;
                records.push(CursorRecord {
                    file_id: file_id.to_string(),
                    line: pos.line,
                    col: pos.col,
                    character: editor.character_at_cursor(),
                    screen_x: b.window_x + meta.screen_x,
                    screen_y: b.window_y + meta.screen_y,
                    window_x: b.window_x,
                    window_y: b.window_y,
                    cursor_width: b.cursor_width,
                    cursor_height: b.cursor_height,
                    device_pixel_ratio: b.device_pixel_ratio,
                });
            }
            Err(e) if e.is_connection_loss() => {
                return Ok(Pass::Lost { partial: outcome(header, records, failed_steps), err: e });
            }
            Err(e) => {
                tracing::warn!(file_id, line = pos.line, col = pos.col, error = %e, "measurement failed, skipping stop");
                failed_steps.push(pos);
            }
        }
        editor.cursor_right();
    }
    Ok(Pass::Done(outcome(header, records, failed_steps)))
}

fn outcome(header: DatasetHeader, records: Vec<CursorRecord>, failed_steps: Vec<CursorView>) -> CollectOutcome {
    CollectOutcome {
        file: CollectionFile { header, records, truncation: None, errors: Vec::new() },
        failed_steps,
        restarts: 0,
    }
}

#[derive(Debug, Clone)]
pub struct CollectionJob {
    pub file_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileSummary {
    pub file_id: String,
    pub path: PathBuf,
    pub records: usize,
    pub failed_steps: usize,
    pub restarts: u32,
    pub truncated: bool,
}

/// Starts a bridge and an in-process renderer, then collects every job into
/// `out_dir/<file_id>.jsonl` with its screenshot under `out_dir/screenshots/`.
pub async fn run_collection(
    config: &CollectorConfig,
    layout: &EditorLayout,
    jobs: &[CollectionJob],
    out_dir: &Path,
) -> Result<Vec<FileSummary>, CollectError> {
    config.validate()?;
    layout.validate()?;
    let shots = out_dir.join("screenshots");
    std::fs::create_dir_all(&shots).map_err(|source| CollectError::Io { path: shots.clone(), source })?;

    let bridge = serve_bridge(config.port, config.request_timeout()).await?;
    let mut editor = EditorModel::new("");
    let renderer_config = RendererConfig {
        window_screen_x: config.window_screen_x,
        window_screen_y: config.window_screen_y,
        caret_width: config.caret_width,
        device_pixel_ratio: config.device_pixel_ratio,
        faults: config.faults,
        stall: config.renderer_stall_ms.map(Duration::from_millis),
        ..RendererConfig::new(*layout)
    };
    let renderer = spawn_renderer(bridge.url(), renderer_config, editor.subscribe());

    let mut summaries = Vec::with_capacity(jobs.len());
    for job in jobs {
        let shot = format!("screenshots/{}.png", job.file_id);
        editor::render(&job.text, layout)?
            .save(out_dir.join(&shot))
            .map_err(cursorbench_core::Error::from)?;
        let outcome = collect_file(&bridge, &mut editor, config, layout, &job.file_id, &job.text, &shot).await?;
        let path = out_dir.join(format!("{}.jsonl", job.file_id));
        write_collection(&path, &outcome.file.header, &outcome.file.records, outcome.file.truncation.as_ref())?;
        tracing::info!(file_id = %job.file_id, records = outcome.file.records.len(), "collected");
        summaries.push(FileSummary {
            file_id: job.file_id.clone(),
            path,
            records: outcome.file.records.len(),
            failed_steps: outcome.failed_steps.len(),
            restarts: outcome.restarts,
            truncated: outcome.file.truncation.is_some(),
        });
    }
    renderer.abort();
    bridge.shutdown();
    Ok(summaries)
}
