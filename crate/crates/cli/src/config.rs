//! Run configuration. Angles are given in degrees and lengths in
//! centimeters; mesh coordinates are meters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stablepose::metrics::AccuracyThresholds;
use stablepose::placements::{StabilityOptions, DEFAULT_SCORE_THRESHOLD};
use stablepose::regrasp::GripperSpec;

use crate::error::{CliError, Result};

const CM: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsConfig {
    pub max_delta_d_deg: f64,
    pub max_delta_h_cm: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig { max_delta_d_deg: 10.0, max_delta_h_cm: 2.0 }
    }
}

impl ThresholdsConfig {
    pub fn to_thresholds(&self) -> AccuracyThresholds {
        AccuracyThresholds { max_delta_d: self.max_delta_d_deg, max_delta_h: self.max_delta_h_cm * CM }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GripperConfig {
    pub max_width_cm: f64,
    pub finger_length_cm: f64,
    pub finger_thickness_cm: f64,
    pub friction_angle_deg: f64,
    pub plane_clearance_cm: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        let g = GripperSpec::default();
        GripperConfig {
            max_width_cm: g.max_width / CM,
            finger_length_cm: g.finger_length / CM,
            finger_thickness_cm: g.finger_thickness / CM,
            friction_angle_deg: g.friction_angle.to_degrees(),
            plane_clearance_cm: g.plane_clearance / CM,
        }
    }
}

impl GripperConfig {
    pub fn to_spec(&self) -> GripperSpec {
        GripperSpec {
            max_width: self.max_width_cm * CM,
            finger_length: self.finger_length_cm * CM,
            finger_thickness: self.finger_thickness_cm * CM,
            friction_angle: self.friction_angle_deg.to_radians(),
            plane_clearance: self.plane_clearance_cm * CM,
        }
    }
}

/// Start and goal placement types for one object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub object: String,
    pub start: usize,
    pub goal: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// OBJ files; relative paths resolve against the config file's directory.
    pub meshes: Vec<PathBuf>,
    pub seed: u64,
    pub drops_per_object: usize,
    pub bandwidth_deg: f64,
    /// Type assignment threshold; defaults to the bandwidth.
    pub assign_threshold_deg: Option<f64>,
    pub margin_eps_cm: f64,
    pub allow_surface_com: bool,
    pub score_threshold: f64,
    pub thresholds: ThresholdsConfig,
    pub diversity: bool,
    pub initial_type: usize,
    pub gripper: GripperConfig,
    pub grasp_samples: usize,
    pub plan: Option<PlanRequest>,
    pub output_dir: PathBuf,
    pub dump_poses: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            meshes: Vec::new(),
            seed: 0,
            drops_per_object: 200,
            bandwidth_deg: 15.0,
            assign_threshold_deg: None,
            margin_eps_cm: 0.01,
            allow_surface_com: false,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            thresholds: ThresholdsConfig::default(),
            diversity: true,
            initial_type: 0,
            gripper: GripperConfig::default(),
            grasp_samples: 200,
            plan: None,
            output_dir: PathBuf::from("out"),
            dump_poses: false,
        }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::usage(format!("config: {what}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for m in &mut self.meshes {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        check(!self.meshes.is_empty(), "at least one mesh is required")?;
        check(self.drops_per_object >= 1, "drops_per_object must be at least 1")?;
        check(positive(self.bandwidth_deg) && self.bandwidth_deg <= 180.0, "bandwidth_deg must lie in (0, 180]")?;
        if let Some(t) = self.assign_threshold_deg {
            check(positive(t) && t <= 180.0, "assign_threshold_deg must lie in (0, 180]")?;
        }
        check(positive(self.margin_eps_cm), "margin_eps_cm must be positive")?;
        check((0.0..=1.0).contains(&self.score_threshold), "score_threshold must lie in [0, 1]")?;
        check(positive(self.thresholds.max_delta_d_deg), "thresholds.max_delta_d_deg must be positive")?;
        check(positive(self.thresholds.max_delta_h_cm), "thresholds.max_delta_h_cm must be positive")?;
        self.gripper
            .to_spec()
            .validate()
            .map_err(|e| CliError::usage(format!("config: gripper: {e}")))?;
        if self.plan.is_some() {
            check(self.grasp_samples >= 1, "grasp_samples must be at least 1 when planning")?;
        }
        Ok(())
    }

    pub fn stability_options(&self) -> StabilityOptions {
        StabilityOptions {
            margin_eps: self.margin_eps_cm * CM,
            allow_surface_com: self.allow_surface_com,
            ..Default::default()
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_deg.to_radians()
    }

    pub fn assign_threshold(&self) -> f64 {
        self.assign_threshold_deg.unwrap_or(self.bandwidth_deg).to_radians()
    }
}

/// Object identifier for a mesh path: its file stem.
pub fn object_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
