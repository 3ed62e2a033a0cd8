//! Pipeline configuration and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default rescue margin delta.
pub const RESCUE_MARGIN_DEFAULT: f64 = 0.15;

/// Alternative rescue margin also reported for the tested configuration;
/// exposed as a preset rather than silently replacing the default.
pub const RESCUE_MARGIN_WIDE: f64 = 0.20;

/// Default confidence-weight floor tau_w.
pub const CONFIDENCE_FLOOR_DEFAULT: f64 = 0.05;

/// Cascade configuration.
///
/// `e1_enabled = false` is the ablation switch that runs the Stage-A
/// schedule at full evidence instead of the partial view; the schedule is
/// unchanged, only the evidence level (and therefore the cost) differs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapsConfig {
    pub finalist_count: usize,
    pub rescue_margin: f64,
    pub confidence_floor: f64,
    pub rescue_enabled: bool,
    pub dedup_enabled: bool,
    pub e1_enabled: bool,
    pub seed: u64,
}

impl Default for CapsConfig {
    fn default() -> Self {
        Self {
            finalist_count: 4,
            rescue_margin: RESCUE_MARGIN_DEFAULT,
            confidence_floor: CONFIDENCE_FLOOR_DEFAULT,
            rescue_enabled: false,
            dedup_enabled: true,
            e1_enabled: true,
            seed: 0,
        }
    }
}

impl CapsConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same configuration with the rescue subroutine switched on or off.
    pub fn with_rescue(mut self, enabled: bool) -> Self {
        self.rescue_enabled = enabled;
        self
    }

    /// Preset using the wider rescue margin (0.20) instead of the 0.15
    /// default.
    pub fn with_wide_rescue_margin(mut self) -> Self {
        self.rescue_margin = RESCUE_MARGIN_WIDE;
        self
    }
}

/// Swiss-baseline configuration: total budget `round(k * N)` comparisons,
/// a minimum comparison degree per candidate, and the rank window used when
/// pairing by adjacent cumulative score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwissConfig {
    pub budget_multiplier: f64,
    pub min_degree: usize,
    pub window: usize,
}

impl Default for SwissConfig {
    fn default() -> Self {
        Self {
            budget_multiplier: 3.0,
            min_degree: 2,
            window: 3,
        }
    }
}

impl SwissConfig {
    /// Total comparison budget at pool size `n`.
    pub fn budget(&self, n: usize) -> u64 {
        (self.budget_multiplier * n as f64).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget_multiplier < 1.0 {
            return Err(ConfigError::InvalidSwiss(
                "budget_multiplier must be >= 1".into(),
            ));
        }
        if self.min_degree < 1 || self.window < 1 {
            return Err(ConfigError::InvalidSwiss(
                "min_degree and window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("finalist count {f} is unreachable for pool size {pool}: one halving round yields at most {reachable} candidates")]
    UnreachableFinalists {
        f: usize,
        pool: usize,
        reachable: usize,
    },
    #[error("finalist count must be at least 1")]
    ZeroFinalists,
    #[error("confidence floor must lie in (0, 1], got {0}")]
    InvalidConfidenceFloor(f64),
    #[error("rescue margin must be >= 0, got {0}")]
    InvalidRescueMargin(f64),
    #[error("invalid swiss configuration: {0}")]
    InvalidSwiss(String),
}

/// Checks a cascade configuration against a concrete pool size.
///
/// The finalist count must be reachable: one Stage-A halving leaves
/// ceil(pool/2) candidates, and later rounds only shrink the pool, so any
/// `f` above that ceiling could never be met. Deduplication may still shrink
/// the pool below `2f` at runtime; that case is legal and simply yields
/// fewer than `f` finalists.
pub fn validate_config(cfg: &CapsConfig, pool_size: usize) -> Result<(), ConfigError> {
    if cfg.finalist_count == 0 {
        return Err(ConfigError::ZeroFinalists);
    }
    let reachable = pool_size.div_ceil(2);
    if cfg.finalist_count > reachable {
        return Err(ConfigError::UnreachableFinalists {
            f: cfg.finalist_count,
            pool: pool_size,
            reachable,
        });
    }
    if !(cfg.confidence_floor > 0.0 && cfg.confidence_floor <= 1.0) {
        return Err(ConfigError::InvalidConfidenceFloor(cfg.confidence_floor));
    }
    if cfg.rescue_margin < 0.0 {
        return Err(ConfigError::InvalidRescueMargin(cfg.rescue_margin));
    }
    Ok(())
}
