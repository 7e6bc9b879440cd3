//! JSON run configuration and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::roi::{CameraModel, EefPose};
use crate::scheduler::GuidanceConfig;
use crate::toy::{EnvConfig, SceneSpec, SuiteParams, ToyPolicyConfig};

/// Step budgets of common benchmark suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxStepPreset {
    LiberoSpatial,
    LiberoGoal,
    LiberoObject,
    #[serde(rename = "libero_10")]
    Libero10,
    Rlbench,
}

impl MaxStepPreset {
    pub fn max_steps(self) -> usize {
        match self {
            MaxStepPreset::LiberoSpatial => 220,
            MaxStepPreset::LiberoGoal => 300,
            MaxStepPreset::LiberoObject => 280,
            MaxStepPreset::Libero10 => 520,
            MaxStepPreset::Rlbench => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Episodes per setting for `bench` and `ablate`.
    pub episodes: usize,
    /// Seed of the first episode; episode `i` uses `seed + i`.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    pub workers: usize,
    pub dump_frames: bool,
    pub overlay: bool,
    /// Also run the unguided policy in `bench`.
    pub baseline: bool,
    /// Replaces `guidance.max_steps` when set.
    pub preset: Option<MaxStepPreset>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            episodes: 50,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            dump_frames: false,
            overlay: false,
            baseline: true,
            preset: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Attention trigger period.
    #[default]
    Freq,
    /// First-frame blur, random-frame blur and first-frame attention.
    Blur,
    /// Baseline, attention only, action only, both.
    Strategy,
}

impl std::str::FromStr for AblationAxis {
    type Err = AtaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" => Ok(Self::Freq),
            "blur" => Ok(Self::Blur),
            "strategy" => Ok(Self::Strategy),
            other => Err(AtaError::Config(format!(
                "unknown ablation axis {other:?} (expected freq, blur or strategy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub axis: AblationAxis,
    pub freqs: Vec<usize>,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            axis: AblationAxis::Freq,
            freqs: vec![0, 20, 50, 100, 200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub guidance: GuidanceConfig,
    pub policy: ToyPolicyConfig,
    pub env: EnvConfig,
    pub suite: SuiteParams,
    /// Scene for `run`; generated from `suite` and `run.seed` when absent.
    pub scene: Option<SceneSpec>,
    /// JSON file holding a scene, used when `scene` is absent.
    pub scene_file: Option<PathBuf>,
    /// Camera for `mask-act`.
    pub camera: Option<CameraModel>,
    /// End-effector pose for `mask-act`.
    pub pose: Option<EefPose>,
    pub run: RunSection,
    pub ablate: AblateSection,
}

/// Values given on the command line; each maps to one config key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub freq: Option<usize>,
    pub i_act: Option<usize>,
    pub alpha: Option<f64>,
    pub z_depth: Option<f64>,
    pub bg: Option<u8>,
    pub dump_frames: bool,
    pub overlay: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AtaError::Config(e.to_string()))
    }

    /// Reads, resolves `scene_file` and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text).map_err(|e| AtaError::Config(format!("{}: {e}", path.display())))?;
        if let Some(rel) = &cfg.scene_file {
            let resolved = path.parent().map(|dir| dir.join(rel)).unwrap_or_else(|| rel.clone());
            cfg.scene_file = Some(resolved);
        }
        cfg.resolve_scene_file()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_scene_file(&mut self) -> Result<()> {
        if self.scene.is_some() {
            return Ok(());
        }
        if let Some(file) = &self.scene_file {
            if !file.exists() {
                return Err(AtaError::Config(format!("scene_file {} does not exist", file.display())));
            }
            let text = std::fs::read_to_string(file)?;
            let scene = serde_json::from_str(&text)
                .map_err(|e| AtaError::Config(format!("{}: {e}", file.display())))?;
            self.scene = Some(scene);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.episodes == 0 {
            return Err(AtaError::Config("run.episodes must be at least 1".into()));
        }
        self.effective_guidance().validate()?;
        self.policy.validate()?;
        self.suite.validate()?;
        if let Some(scene) = &self.scene {
            scene.validate()?;
        }
        if self.ablate.freqs.is_empty() {
            return Err(AtaError::Config("ablate.freqs must not be empty".into()));
        }
        Ok(())
    }

    /// Applies command-line values over the file's.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.run.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.run.seed = v;
        }
        if let Some(v) = o.freq {
            self.guidance.freq = v;
        }
        if let Some(v) = o.i_act {
            self.guidance.i_act = v;
        }
        if let Some(v) = o.alpha {
            self.guidance.roi.alpha = v;
        }
        if let Some(v) = o.z_depth {
            self.guidance.roi.z_depth = v;
        }
        if let Some(v) = o.bg {
            self.guidance.bg = v;
        }
        self.run.dump_frames |= o.dump_frames;
        self.run.overlay |= o.overlay;
    }

    /// Guidance with the step preset applied.
    pub fn effective_guidance(&self) -> GuidanceConfig {
        let mut g = self.guidance;
        if let Some(p) = self.run.preset {
            g.max_steps = p.max_steps();
        }
        g
    }
}
