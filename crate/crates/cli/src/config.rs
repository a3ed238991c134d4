//! Effective run configuration: built-in defaults, overridden by a config
//! file (`--config` or `$MAGI_PIPE_CONFIG`), overridden by command-line
//! flags. The effective configuration is echoed into every output manifest.

use serde::{Deserialize, Serialize};
use std::path::Path;

use magi_pipe::geometry::{
    Tolerance, DEFAULT_EPSILON_FRACTION, DEFAULT_EROSION_STEP_FRACTION, DEFAULT_MAX_EROSION_ITERS,
};

pub const CONFIG_ENV_VAR: &str = "MAGI_PIPE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub tau: f64,
    pub confidence_cutoff: f64,
    pub epsilon_fraction: f64,
    pub erosion_step_fraction: f64,
    pub max_erosion_iters: usize,
    pub iou_threshold: f64,
    pub top_k: usize,
    pub threshold_sweep: bool,
    pub emit_panel_markers: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tau: 0.65,
            confidence_cutoff: 0.4,
            epsilon_fraction: DEFAULT_EPSILON_FRACTION,
            erosion_step_fraction: DEFAULT_EROSION_STEP_FRACTION,
            max_erosion_iters: DEFAULT_MAX_EROSION_ITERS,
            iou_threshold: 0.5,
            top_k: 100,
            threshold_sweep: false,
            emit_panel_markers: false,
            seed: 0,
        }
    }
}

/// Config-file schema: every field optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub tau: Option<f64>,
    pub confidence_cutoff: Option<f64>,
    pub epsilon_fraction: Option<f64>,
    pub erosion_step_fraction: Option<f64>,
    pub max_erosion_iters: Option<usize>,
    pub iou_threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub threshold_sweep: Option<bool>,
    pub emit_panel_markers: Option<bool>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn apply_file(&mut self, file: &FileConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = file.$field { self.$field = v; })*
            };
        }
        take!(
            tau,
            confidence_cutoff,
            epsilon_fraction,
            erosion_step_fraction,
            max_erosion_iters,
            iou_threshold,
            top_k,
            threshold_sweep,
            emit_panel_markers,
            seed
        );
    }

    /// Reject out-of-range values with a usage-level error message.
    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must be in [0, 1], got {v}"))
            }
        };
        unit("tau", self.tau)?;
        unit("confidence-cutoff", self.confidence_cutoff)?;
        unit("iou", self.iou_threshold)?;
        for (name, v) in [
            ("epsilon", self.epsilon_fraction),
            ("erosion-step", self.erosion_step_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("{name} must be a fraction in (0, 1), got {v}"));
            }
        }
        if self.max_erosion_iters == 0 {
            return Err("max_erosion_iters must be at least 1".into());
        }
        if self.top_k == 0 {
            return Err("top-k must be at least 1".into());
        }
        Ok(())
    }

    pub fn tolerance_for(&self, width: f64, height: f64) -> Tolerance {
        Tolerance::for_page_with(
            width,
            height,
            self.epsilon_fraction,
            self.erosion_step_fraction,
            self.max_erosion_iters,
        )
    }
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, String> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&raw).map_err(|e| format!("invalid config {}: {e}", path.display()))
}
