use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::CollectError;
use crate::renderer::FaultPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectorConfig {
    /// 0 picks a free port.
    pub port: u16,
    pub settle_delay_ms: u64,
    pub request_timeout_ms: u64,
    /// Consecutive observations of one cursor position that signal end of file.
    pub eof_repeat_threshold: u32,
    /// How long to wait for the renderer to (re)connect.
    pub connect_timeout_ms: u64,
    /// Times a file is restarted after the renderer reconnects mid-file.
    pub max_restarts: u32,
    /// Screen position of the editor window, CSS pixels.
    pub window_screen_x: f64,
    pub window_screen_y: f64,
    pub caret_width: f64,
    pub device_pixel_ratio: f64,
    pub faults: FaultPlan,
    /// Test fixture: the simulated renderer delays every measurement by this much.
    pub renderer_stall_ms: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            port: 54321,
            settle_delay_ms: 80,
            request_timeout_ms: 3000,
            eof_repeat_threshold: 3,
            connect_timeout_ms: 5000,
            max_restarts: 1,
            window_screen_x: 0.0,
            window_screen_y: 0.0,
            caret_width: 2.0,
            device_pixel_ratio: 1.0,
            faults: FaultPlan::default(),
            renderer_stall_ms: None,
            corpus: None,
            output: None,
        }
    }
}

impl CollectorConfig {
    pub fn validate(&self) -> Result<(), CollectError> {
        let fail = |m: &str| Err(CollectError::Config(m.into()));
        if self.settle_delay_ms == 0 || self.request_timeout_ms == 0 || self.connect_timeout_ms == 0 {
            return fail("durations must be positive");
        }
        if self.eof_repeat_threshold < 2 {
            return fail("eof_repeat_threshold must be at least 2");
        }
        if self.caret_width.is_nan() || self.caret_width <= 0.0 || self.device_pixel_ratio.is_nan() || self.device_pixel_ratio <= 0.0 {
            return fail("caret width and device pixel ratio must be positive");
        }
        if !(0.0..=1.0).contains(&self.faults.rate) {
            return fail("fault rate must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn settle_delay(&self) -> Duration {
        Duration::from_millis(self.settle_delay_ms)
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }

    pub fn connect_timeout(&self) -> Duration {
        Duration::from_millis(self.connect_timeout_ms)
    }
}
