//! Inference loop with scheduled observation guidance.
//!
//! Every iteration observes the environment, optionally rewrites the current
//! observation and then asks the policy for an action chunk:
//!
//! 1. attention guidance fires when `i % freq == 0` (`freq == 0` means only at
//!    `i == 0`). It costs one extra policy pass to probe attention on the
//!    observation of that step.
//! 2. action guidance fires once, at `i == i_act`, and needs only the
//!    end-effector pose and camera.
//!
//! When both fire on the same step the attention mask is applied first. A
//! guided observation is used for that step only; the next iteration starts
//! again from the raw environment observation. The loop ends on success or
//! after `max_steps` iterations.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{aggregate_heads, AttentionTensor};
use crate::compositor::{blend, gaussian_blur, Image, DEFAULT_BG, DEFAULT_BLUR_SIGMA};
use crate::error::{AtaError, Result};
use crate::mask::{normalize_sigmoid, upsample, PixelMask};
use crate::roi::{conic_mask_or_identity, project_ray, CameraModel, EefPose, RoiParams};

pub const DEFAULT_MAX_STEPS: usize = 220;

/// Perturbation applied to raw frames before any guidance, for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurMode {
    #[default]
    None,
    FirstFrame,
    RandomFrames,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlurAblation {
    pub mode: BlurMode,
    pub sigma: f64,
    /// Per-frame probability for [`BlurMode::RandomFrames`] (frames after the first).
    pub probability: f64,
}

impl Default for BlurAblation {
    fn default() -> Self {
        Self {
            mode: BlurMode::None,
            sigma: DEFAULT_BLUR_SIGMA,
            probability: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Layer whose attention is probed.
    pub layer: usize,
    /// Attention trigger period; 0 fires on the first step only.
    pub freq: usize,
    /// Step at which action guidance fires.
    pub i_act: usize,
    pub max_steps: usize,
    pub bg: u8,
    pub roi: RoiParams,
    pub attention_guidance_enabled: bool,
    pub action_guidance_enabled: bool,
    pub blur: BlurAblation,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            layer: 0,
            freq: 0,
            i_act: 0,
            max_steps: DEFAULT_MAX_STEPS,
            bg: DEFAULT_BG,
            roi: RoiParams::default(),
            attention_guidance_enabled: true,
            action_guidance_enabled: true,
            blur: BlurAblation::default(),
        }
    }
}

impl GuidanceConfig {
    /// Plain policy rollout.
    pub fn disabled() -> Self {
        Self {
            attention_guidance_enabled: false,
            action_guidance_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(AtaError::contract("max_steps must be at least 1"));
        }
        if self.action_guidance_enabled {
            self.roi.validate()?;
        }
        if self.blur.mode != BlurMode::None {
            if !(self.blur.sigma > 0.0) {
                return Err(AtaError::contract(format!("blur sigma must be positive, got {}", self.blur.sigma)));
            }
            if !(0.0..=1.0).contains(&self.blur.probability) {
                return Err(AtaError::contract(format!(
                    "blur probability must be in [0, 1], got {}",
                    self.blur.probability
                )));
            }
        }
        Ok(())
    }

    pub fn attention_fires(&self, step: usize) -> bool {
        self.attention_guidance_enabled
            && match self.freq {
                0 => step == 0,
                f => step % f == 0,
            }
    }

    pub fn action_fires(&self, step: usize) -> bool {
        self.action_guidance_enabled && step == self.i_act
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceKind {
    Attention,
    Action,
}

/// All `(step, kind)` pairs that fire within the first `max_steps` steps.
pub fn guidance_schedule(cfg: &GuidanceConfig, max_steps: usize) -> BTreeSet<(usize, GuidanceKind)> {
    let mut out = BTreeSet::new();
    if cfg.attention_guidance_enabled {
        match cfg.freq {
            0 => {
                if max_steps > 0 {
                    out.insert((0, GuidanceKind::Attention));
                }
            }
            f => out.extend((0..max_steps).step_by(f).map(|i| (i, GuidanceKind::Attention))),
        }
    }
    if cfg.action_guidance_enabled && cfg.i_act < max_steps {
        out.insert((cfg.i_act, GuidanceKind::Action));
    }
    out
}

/// One incremental 7-DoF command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// End-effector displacement, meters.
    pub dx: [f64; 3],
    /// Orientation increment, axis-angle radians.
    pub dtheta: [f64; 3],
    pub dgrip: f64,
}

impl Action {
    pub fn is_finite(&self) -> bool {
        self.dx.iter().chain(&self.dtheta).all(|v| v.is_finite()) && self.dgrip.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionChunk {
    pub actions: Vec<Action>,
}

impl ActionChunk {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        let chunk = Self { actions };
        chunk.validate()?;
        Ok(chunk)
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(AtaError::contract("action chunk is empty"));
        }
        if let Some(i) = self.actions.iter().position(|a| !a.is_finite()) {
            return Err(AtaError::contract(format!("action {i} of the chunk is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: EefPose,
    pub grip: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Image,
    pub state: RobotState,
}

/// A policy that predicts action chunks and can report its attention.
pub trait Policy {
    fn predict(&mut self, instruction: &str, obs: &Observation) -> Result<ActionChunk>;

    /// Attention of the last query token at `layer`, for the same inputs as
    /// [`Policy::predict`].
    fn probe_attention(&mut self, instruction: &str, obs: &Observation, layer: usize) -> Result<AttentionTensor>;
}

/// An environment driven one chunk per inference step.
pub trait Environment {
    fn observe(&mut self) -> Result<Observation>;

    /// Executes the chunk (or its first action, depending on the
    /// environment's execution mode) and reports success.
    fn step(&mut self, chunk: &ActionChunk) -> Result<bool>;

    fn camera(&self) -> &CameraModel;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidedFrame {
    pub step: usize,
    pub kind: GuidanceKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Every policy forward pass, probes included.
    pub policy_calls: usize,
    pub env_steps: usize,
    pub guided_frames: Vec<GuidedFrame>,
    /// Diagnostic when the episode was cut short by a contract violation.
    pub aborted: Option<String>,
}

impl EpisodeMetrics {
    pub fn guided_count(&self, kind: GuidanceKind) -> usize {
        self.guided_frames.iter().filter(|g| g.kind == kind).count()
    }
}

/// Per-episode inputs that are not part of the guidance configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub instruction: String,
    /// Seeds frame-level randomness (random-frame blur).
    pub seed: u64,
}

/// What the policy saw at one step.
pub struct FrameRecord<'a> {
    pub step: usize,
    pub image: &'a Image,
    pub guidance: &'a [GuidanceKind],
}

/// Attention mask at image resolution for one probe.
pub fn attention_mask(t: &AttentionTensor, width: u32, height: u32) -> Result<PixelMask> {
    let psi = aggregate_heads(t)?;
    upsample(&normalize_sigmoid(&psi)?, width, height)
}

/// Action-guided mask at image resolution; all ones when the ray is degenerate.
pub fn action_mask(cam: &CameraModel, pose: &EefPose, roi: &RoiParams, width: u32, height: u32) -> Result<PixelMask> {
    let ray = project_ray(cam, pose, roi)?;
    conic_mask_or_identity(&ray, roi.alpha, width, height)
}

pub fn run_episode<P: Policy + ?Sized, E: Environment + ?Sized>(
    policy: &mut P,
    env: &mut E,
    cfg: &GuidanceConfig,
    episode: &EpisodeSpec,
) -> EpisodeMetrics {
    run_episode_observed(policy, env, cfg, episode, &mut |_| {})
}

/// [`run_episode`] with a callback receiving the observation fed to the
/// policy at every step.
pub fn run_episode_observed<P: Policy + ?Sized, E: Environment + ?Sized>(
    policy: &mut P,
    env: &mut E,
    cfg: &GuidanceConfig,
    episode: &EpisodeSpec,
    on_frame: &mut dyn FnMut(FrameRecord<'_>),
) -> EpisodeMetrics {
    let mut metrics = EpisodeMetrics::default();
    if let Err(e) = cfg.validate() {
        metrics.aborted = Some(e.to_string());
        return metrics;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(episode.seed);

    for step in 0..cfg.max_steps {
        match guided_step(policy, env, cfg, episode, step, &mut rng, &mut metrics, on_frame) {
            Ok(true) => {
                metrics.success = true;
                break;
            }
            Ok(false) => {}
            Err(e) => {
                log::error!("episode aborted at step {step}: {e}");
                metrics.success = false;
                metrics.aborted = Some(format!("step {step}: {e}"));
                break;
            }
        }
    }
    metrics
}

#[allow(clippy::too_many_arguments)]
fn guided_step<P: Policy + ?Sized, E: Environment + ?Sized>(
    policy: &mut P,
    env: &mut E,
    cfg: &GuidanceConfig,
    episode: &EpisodeSpec,
    step: usize,
    rng: &mut ChaCha8Rng,
    metrics: &mut EpisodeMetrics,
    on_frame: &mut dyn FnMut(FrameRecord<'_>),
) -> Result<bool> {
    let mut obs = env.observe()?;
    let (w, h) = obs.image.dimensions();

    // drawn every step so the stream does not depend on the blur mode
    let coin = rng.random::<f64>();
    let blur_now = match cfg.blur.mode {
        BlurMode::None => false,
        BlurMode::FirstFrame => step == 0,
        BlurMode::RandomFrames => step > 0 && coin < cfg.blur.probability,
    };
    if blur_now {
        obs.image = gaussian_blur(&obs.image, cfg.blur.sigma)?;
    }

    let mut applied = Vec::new();
    if cfg.attention_fires(step) {
        metrics.policy_calls += 1;
        let probe = policy.probe_attention(&episode.instruction, &obs, cfg.layer)?;
        let mask = attention_mask(&probe, w, h)?;
        obs.image = blend(&obs.image, &mask, cfg.bg)?;
        applied.push(GuidanceKind::Attention);
    }
    if cfg.action_fires(step) {
        let mask = action_mask(env.camera(), &obs.state.pose, &cfg.roi, w, h)?;
        obs.image = blend(&obs.image, &mask, cfg.bg)?;
        applied.push(GuidanceKind::Action);
    }
    metrics
        .guided_frames
        .extend(applied.iter().map(|&kind| GuidedFrame { step, kind }));

    on_frame(FrameRecord {
        step,
        image: &obs.image,
        guidance: &applied,
    });

    metrics.policy_calls += 1;
    let chunk = policy.predict(&episode.instruction, &obs)?;
    chunk.validate()?;
    metrics.env_steps += 1;
    env.step(&chunk)
}

/// Success rate and inference-call averages over a set of episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub successes: usize,
    pub avg_sr: f64,
    /// Mean policy calls over successful episodes; `None` when none succeeded.
    pub avg_sic: Option<f64>,
    pub avg_ic: f64,
}

pub fn aggregate_metrics(episodes: &[EpisodeMetrics]) -> Result<MetricsSummary> {
    if episodes.is_empty() {
        return Err(AtaError::structural("cannot aggregate zero episodes"));
    }
    // integer sums keep the result independent of episode order
    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.success).count();
    let all_calls: u64 = episodes.iter().map(|e| e.policy_calls as u64).sum();
    let ok_calls: u64 = episodes.iter().filter(|e| e.success).map(|e| e.policy_calls as u64).sum();
    Ok(MetricsSummary {
        episodes: n,
        successes,
        avg_sr: successes as f64 / n as f64,
        avg_sic: (successes > 0).then(|| ok_calls as f64 / successes as f64),
        avg_ic: all_calls as f64 / n as f64,
    })
}
