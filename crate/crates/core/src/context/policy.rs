use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ContextError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraContext {
    #[serde(default)]
    pub camera_id: String,
    pub placement: Placement,
    /// 1 = relaxed, 3 = high security.
    pub security_level: u8,
    #[serde(default)]
    pub tz_offset_hours: f64,
}

impl CameraContext {
    pub fn validate(&self) -> Result<(), ContextError> {
        if !(1..=3).contains(&self.security_level) {
            return Err(ContextError::InvalidCamera {
                camera: self.camera_id.clone(),
                reason: format!(
                    "security_level must be 1, 2 or 3, got {}",
                    self.security_level
                ),
            });
        }
        if !self.tz_offset_hours.is_finite() || self.tz_offset_hours.abs() > 14.0 {
            return Err(ContextError::InvalidCamera {
                camera: self.camera_id.clone(),
                reason: format!("timezone offset {} out of range", self.tz_offset_hours),
            });
        }
        Ok(())
    }
}

/// Threshold table: a base percentage shifted by security tier and by outdoor after-hours placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub base: f64,
    /// Added once per security tier above 1.
    pub tier_step: f64,
    /// Added for outdoor cameras during after-hours.
    pub outdoor_after_hours_step: f64,
    /// After-hours window `[start, end)` in local hours; wraps past midnight when start > end.
    pub after_hours: (f64, f64),
    pub min: f64,
    pub max: f64,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            base: 60.0,
            tier_step: -10.0,
            outdoor_after_hours_step: -5.0,
            after_hours: (22.0, 6.0),
            min: 30.0,
            max: 90.0,
        }
    }
}

pub fn is_after_hours(policy: &ThresholdPolicy, hour: f64) -> bool {
    let (start, end) = policy.after_hours;
    if start <= end {
        hour >= start && hour < end
    } else {
        hour >= start || hour < end
    }
}

/// Alarm threshold in percent for a camera at a local hour.
pub fn alarm_threshold(policy: &ThresholdPolicy, ctx: &CameraContext, hour: f64) -> f64 {
    let tiers_above = ctx.security_level.saturating_sub(1) as f64;
    let mut t = policy.base + policy.tier_step * tiers_above;
    if ctx.placement == Placement::Outdoor && is_after_hours(policy, hour) {
        t += policy.outdoor_after_hours_step;
    }
    t.clamp(policy.min, policy.max)
}

/// Camera contexts keyed by camera id plus the threshold policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    #[serde(default)]
    pub policy: ThresholdPolicy,
    pub cameras: BTreeMap<String, CameraContext>,
}

impl ContextConfig {
    pub fn single(ctx: CameraContext) -> Self {
        let mut cameras = BTreeMap::new();
        cameras.insert(ctx.camera_id.clone(), ctx);
        Self {
            policy: ThresholdPolicy::default(),
            cameras,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ContextError> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| ContextError::Load(e.to_string()))?;
        for (id, cam) in cfg.cameras.iter_mut() {
            cam.camera_id = id.clone();
            cam.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContextError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ContextError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context config serializes")
    }

    pub fn camera(&self, id: &str) -> Result<&CameraContext, ContextError> {
        self.cameras
            .get(id)
            .ok_or_else(|| ContextError::UnknownCamera(id.to_string()))
    }
}
