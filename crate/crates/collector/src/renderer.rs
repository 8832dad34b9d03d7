//! Simulated renderer: the client end of the bridge.
//!
//! It answers `get_window_metadata` and `get_cursor_position` from the editor
//! layout and the caret position published by [`crate::model::EditorModel`].
//! Fault hooks can fail measurements, delay answers, or drop the connection.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use cursorbench_core::editor::{cursor_ground_truth, EditorLayout};
use cursorbench_core::seed::rng_for;
use futures::{SinkExt, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

use crate::model::CursorView;
use crate::protocol::{BridgeRequest, BridgeResponse, CursorBox, Method, WindowMetadata};

/// Seeded measurement failures: measurement `k` fails with probability `rate`,
/// decided by a stream derived from `(seed, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultPlan {
    pub rate: f64,
    pub seed: u64,
}

impl FaultPlan {
    pub fn fails(&self, step: u64) -> bool {
        self.rate > 0.0 && rng_for(self.seed, &format!("collector/fault/{step}")).random_bool(self.rate.min(1.0))
    }
}

#[derive(Debug, Clone)]
pub struct RendererConfig {
    pub layout: EditorLayout,
    pub window_screen_x: f64,
    pub window_screen_y: f64,
    pub caret_width: f64,
    pub device_pixel_ratio: f64,
    pub faults: FaultPlan,
    /// Delay before every cursor measurement answer.
    pub stall: Option<Duration>,
    /// Drop the connection instead of answering the measurement after this many.
    pub disconnect_after: Option<u64>,
    /// Reconnect once after a deliberate drop.
    pub reconnect: bool,
}

impl RendererConfig {
    pub fn new(layout: EditorLayout) -> Self {
        Self {
            layout,
            window_screen_x: 0.0,
            window_screen_y: 0.0,
            caret_width: 2.0,
            device_pixel_ratio: 1.0,
            faults: FaultPlan::default(),
            stall: None,
            disconnect_after: None,
            reconnect: false,
        }
    }
}

/// Caret bounding box relative to the window: centered on the boundary
/// before `col`, spanning the full line.
pub fn measure_cursor(
    layout: &EditorLayout,
    line: u32,
    col: u32,
    caret_width: f64,
    device_pixel_ratio: f64,
) -> cursorbench_core::Result<CursorBox> {
    let p = cursor_ground_truth(line as usize, col as usize, layout)?;
    let lh = f64::from(layout.line_height);
    Ok(CursorBox {
        window_x: p.x - caret_width / 2.0,
        window_y: p.y - lh / 2.0,
        cursor_width: caret_width,
        cursor_height: lh,
        device_pixel_ratio,
    })
}

#[derive(Debug, Default)]
pub struct RendererStats {
    pub measurements: AtomicU64,
    pub faults_injected: AtomicU64,
    pub connections: AtomicU64,
}

pub struct RendererHandle {
    pub stats: Arc<RendererStats>,
    task: JoinHandle<()>,
}

impl RendererHandle {
    pub fn faults_injected(&self) -> u64 {
        self.stats.faults_injected.load(Ordering::SeqCst)
    }

    pub fn abort(&self) {
        self.task.abort();
    }
}

impl Drop for RendererHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub fn spawn_renderer(url: String, config: RendererConfig, view: watch::Receiver<CursorView>) -> RendererHandle {
    let stats = Arc::new(RendererStats::default());
    let task = tokio::spawn(run(url, config, view, stats.clone()));
    RendererHandle { stats, task }
}

enum Session {
    Dropped,
    Closed,
}

async fn run(url: String, config: RendererConfig, view: watch::Receiver<CursorView>, stats: Arc<RendererStats>) {
    let mut dropped_once = false;
    loop {
        match session(&url, &config, &view, &stats, dropped_once).await {
            Ok(Session::Dropped) if config.reconnect => {
                dropped_once = true;
                tracing::info!("renderer reconnecting");
            }
            Ok(_) => return,
            Err(e) => {
                tracing::warn!(error = %e, "renderer connection failed");
                return;
            }
        }
    }
}

async fn session(
    url: &str,
    config: &RendererConfig,
    view: &watch::Receiver<CursorView>,
    stats: &Arc<RendererStats>,
    dropped_once: bool,
) -> Result<Session, tokio_tungstenite::tungstenite::Error> {
    let (ws, _) = connect_async(url).await?;
    stats.connections.fetch_add(1, Ordering::SeqCst);
    let (mut sink, mut stream) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<BridgeResponse>();
    let mut answered = 0u64;
    loop {
        tokio::select! {
            frame = stream.next() => {
                let text = match frame {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return Ok(Session::Closed),
                    Some(Ok(_)) => continue,
                };
                let request: BridgeRequest = match serde_json::from_str(text.as_str()) {
                    Ok(r) => r,
                    Err(e) => {
                        tracing::warn!(error = %e, "renderer got a malformed request");
                        continue;
                    }
                };
                if request.method == Method::GetCursorPosition {
                    if !dropped_once && config.disconnect_after.is_some_and(|n| answered >= n) {
                        let _ = sink.close().await;
                        return Ok(Session::Dropped);
                    }
                    answered += 1;
                }
                let response = answer(&request, config, *view.borrow(), stats);
                match config.stall.filter(|_| request.method == Method::GetCursorPosition) {
                    Some(delay) => {
                        let tx = tx.clone();
                        tokio::spawn(async move {
                            tokio::time::sleep(delay).await;
                            let _ = tx.send(response);
                        });
                    }
                    None => {
                        let _ = tx.send(response);
                    }
                }
            }
            Some(response) = rx.recv() => {
                let text = serde_json::to_string(&response).expect("responses serialize");
                if sink.send(Message::text(text)).await.is_err() {
                    return Ok(Session::Closed);
                }
            }
        }
    }
}

fn answer(request: &BridgeRequest, config: &RendererConfig, cursor: CursorView, stats: &RendererStats) -> BridgeResponse {
    let id = request.id;
    match request.method {
        Method::GetWindowMetadata => {
            let meta = WindowMetadata {
                screen_x: config.window_screen_x,
                screen_y: config.window_screen_y,
                width: f64::from(config.layout.image_width),
                height: f64::from(config.layout.image_height),
                device_pixel_ratio: config.device_pixel_ratio,
            };
            BridgeResponse::ok(id, serde_json::to_value(meta).expect("metadata serializes"))
        }
        Method::GetCursorPosition => {
            let step = stats.measurements.fetch_add(1, Ordering::SeqCst);
            if config.faults.fails(step) {
                stats.faults_injected.fetch_add(1, Ordering::SeqCst);
                return BridgeResponse::err(id, format!("injected measurement failure at step {step}"));
            }
            match measure_cursor(&config.layout, cursor.line, cursor.col, config.caret_width, config.device_pixel_ratio) {
                Ok(b) => BridgeResponse::ok(id, serde_json::to_value(b).expect("cursor box serializes")),
                Err(e) => BridgeResponse::err(id, e.to_string()),
            }
        }
    }
}
