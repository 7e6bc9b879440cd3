//! Two-layer color-attention policy.
//!
//! The token sequence is the `R x C` patch embeddings (mean RGB of each
//! cell, scaled to `[0, 1]`) followed by one instruction token holding the
//! requested color.
//!
//! * Layer 0 heads score keys by negative squared color distance to the
//!   instruction color, so they peak on exact color matches.
//! * Layer 1 heads score keys by the dot product of chroma vectors
//!   (color minus its gray level). Saturated patches of a similar hue beat a
//!   faithful match here, which is the failure mode guidance can fix.
//!
//! The action heads toward the patch that layer 1 attends to most.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::{cell_bounds, cell_world, parse_color_token, ToyState};
use crate::attention::{argmax, toy_attention, AttentionTensor, GridShape, HeadQk, ImageSpan, TokenLayout};
use crate::compositor::Image;
use crate::error::{AtaError, Result};
use crate::roi::CameraModel;
use crate::scheduler::{Action, ActionChunk, Observation, Policy};

pub const MATCH_LAYER: usize = 0;
pub const READOUT_LAYER: usize = 1;
pub const NUM_LAYERS: usize = 2;

const MATCH_DIM: usize = 5;
const READOUT_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyPolicyConfig {
    /// One entry per layer-0 head.
    pub match_gains: Vec<f64>,
    /// One entry per layer-1 head.
    pub readout_gains: Vec<f64>,
    /// Largest displacement of a single action, meters.
    pub step_cap: f64,
    /// Actions per predicted chunk.
    pub horizon: usize,
}

impl Default for ToyPolicyConfig {
    fn default() -> Self {
        Self {
            match_gains: vec![4000.0, 8000.0],
            readout_gains: vec![40.0, 80.0],
            step_cap: 0.1,
            horizon: 16,
        }
    }
}

impl ToyPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.match_gains.is_empty() || self.readout_gains.is_empty() {
            return Err(AtaError::contract("every policy layer needs at least one head"));
        }
        if let Some(g) = self.match_gains.iter().chain(&self.readout_gains).find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(AtaError::contract(format!("head gains must be positive, got {g}")));
        }
        if !(self.step_cap.is_finite() && self.step_cap > 0.0) {
            return Err(AtaError::contract(format!("step cap must be positive, got {}", self.step_cap)));
        }
        if self.horizon == 0 {
            return Err(AtaError::contract("chunk horizon must be at least 1"));
        }
        Ok(())
    }
}

/// Everything one forward pass produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub chunk: ActionChunk,
    /// Attention of each layer, indexed by layer.
    pub attention: Vec<AttentionTensor>,
    /// Patch the readout layer selected; `None` when its attention is flat.
    pub goal_cell: Option<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct ToyPolicy {
    config: ToyPolicyConfig,
    camera: CameraModel,
    grid: GridShape,
}

impl ToyPolicy {
    pub fn new(config: ToyPolicyConfig, camera: CameraModel, grid: GridShape) -> Result<Self> {
        config.validate()?;
        camera.validate()?;
        if grid.cells() == 0 {
            return Err(AtaError::contract("policy patch grid is empty"));
        }
        Ok(Self { config, camera, grid })
    }

    pub fn config(&self) -> &ToyPolicyConfig {
        &self.config
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    /// Runs both layers on `img` and plans a chunk from `eef`.
    pub fn forward(&self, img: &Image, instruction: &str, eef: [f64; 3]) -> Result<PolicyOutput> {
        let (w, h) = img.dimensions();
        if (w as usize) < self.grid.cols || (h as usize) < self.grid.rows {
            return Err(AtaError::structural(format!(
                "{w}x{h} image cannot be split into a {}x{} patch grid",
                self.grid.rows, self.grid.cols
            )));
        }
        let query_color = to_unit(parse_color_token(instruction)?);
        let mut tokens = patch_embeddings(img, self.grid);
        tokens.push(query_color);

        let attention = vec![
            self.match_layer(&tokens, query_color)?,
            self.readout_layer(&tokens, query_color)?,
        ];
        let goal_cell = attended_cell(&attention[READOUT_LAYER])?;
        let chunk = match goal_cell {
            Some(cell) => {
                let goal = cell_world(&self.camera, w, h, self.grid, cell)?;
                plan_chunk(eef, goal.into(), self.config.step_cap, self.config.horizon)?
            }
            None => ActionChunk::new(vec![Action::default(); self.config.horizon])?,
        };
        Ok(PolicyOutput {
            chunk,
            attention,
            goal_cell,
        })
    }

    fn layout(&self, layer_index: usize) -> TokenLayout {
        TokenLayout {
            layer_index,
            image_span: ImageSpan {
                start: 0,
                len: self.grid.cells(),
            },
            grid: self.grid,
        }
    }

    fn match_layer(&self, tokens: &[[f64; 3]], c: [f64; 3]) -> Result<AttentionTensor> {
        // q.k / sqrt(d) = -g |e - c|^2 with k = [e, |e|^2, 1]
        let keys: Vec<f64> = tokens
            .iter()
            .flat_map(|e| [e[0], e[1], e[2], norm2(e), 1.0])
            .collect();
        let root_d = (MATCH_DIM as f64).sqrt();
        let heads: Vec<HeadQk> = self
            .config
            .match_gains
            .iter()
            .map(|&g| {
                let s = root_d * g;
                HeadQk {
                    query: vec![2.0 * s * c[0], 2.0 * s * c[1], 2.0 * s * c[2], -s, -s * norm2(&c)],
                    keys: keys.clone(),
                }
            })
            .collect();
        toy_attention(&heads, MATCH_DIM, self.layout(MATCH_LAYER))
    }

    fn readout_layer(&self, tokens: &[[f64; 3]], c: [f64; 3]) -> Result<AttentionTensor> {
        let keys: Vec<f64> = tokens.iter().flat_map(chroma).collect();
        let cq = chroma(&c);
        let root_d = (READOUT_DIM as f64).sqrt();
        let heads: Vec<HeadQk> = self
            .config
            .readout_gains
            .iter()
            .map(|&g| HeadQk {
                query: cq.iter().map(|v| root_d * g * v).collect(),
                keys: keys.clone(),
            })
            .collect();
        toy_attention(&heads, READOUT_DIM, self.layout(READOUT_LAYER))
    }
}

impl Policy for ToyPolicy {
    fn predict(&mut self, instruction: &str, obs: &Observation) -> Result<ActionChunk> {
        Ok(self.forward(&obs.image, instruction, obs.state.pose.position)?.chunk)
    }

    fn probe_attention(&mut self, instruction: &str, obs: &Observation, layer: usize) -> Result<AttentionTensor> {
        if layer >= NUM_LAYERS {
            return Err(AtaError::contract(format!(
                "layer {layer} requested but the toy policy has {NUM_LAYERS} layers"
            )));
        }
        let mut out = self.forward(&obs.image, instruction, obs.state.pose.position)?;
        Ok(out.attention.swap_remove(layer))
    }
}

/// One forward pass on the current state: the planned chunk and the
/// layer-0 attention.
pub fn toy_policy_step(
    policy: &ToyPolicy,
    img: &Image,
    instruction: &str,
    state: &ToyState,
) -> Result<(ActionChunk, AttentionTensor)> {
    let mut out = policy.forward(img, instruction, state.eef)?;
    Ok((out.chunk, out.attention.swap_remove(MATCH_LAYER)))
}

/// Mean color of every patch cell, row-major, scaled to `[0, 1]`.
pub fn patch_embeddings(img: &Image, grid: GridShape) -> Vec<[f64; 3]> {
    let (w, h) = img.dimensions();
    let mut out = Vec::with_capacity(grid.cells());
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            let (x0, x1, y0, y1) = cell_bounds(w, h, grid, [i, j]);
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = img.get_pixel(x, y).0;
                    for k in 0..3 {
                        sum[k] += p[k] as u64;
                    }
                }
            }
            let n = ((x1 - x0) as u64 * (y1 - y0) as u64) as f64 * 255.0;
            out.push(sum.map(|s| s as f64 / n));
        }
    }
    out
}

/// Color minus its gray level.
pub fn chroma(e: &[f64; 3]) -> [f64; 3] {
    let gray = (e[0] + e[1] + e[2]) / 3.0;
    [e[0] - gray, e[1] - gray, e[2] - gray]
}

/// Straight-line chunk toward `goal`, each action at most `cap` long.
/// Actions after arrival are zero.
pub fn plan_chunk(eef: [f64; 3], goal: [f64; 3], cap: f64, horizon: usize) -> Result<ActionChunk> {
    let mut pos = Vector3::from(eef);
    let goal = Vector3::from(goal);
    let mut actions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let delta = goal - pos;
        let len = delta.norm();
        let dx = if len > cap { delta * (cap / len) } else { delta };
        pos += dx;
        actions.push(Action {
            dx: dx.into(),
            ..Action::default()
        });
    }
    ActionChunk::new(actions)
}

/// Head-averaged argmax over the image tokens; `None` if all are equal.
fn attended_cell(t: &AttentionTensor) -> Result<Option<[usize; 2]>> {
    let psi = crate::attention::aggregate_heads(t)?;
    let lo = psi.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = psi.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= f64::EPSILON * hi {
        return Ok(None);
    }
    Ok(argmax(&psi.values).map(|k| [k / psi.cols, k % psi.cols]))
}

fn to_unit(c: [u8; 3]) -> [f64; 3] {
    c.map(|v| v as f64 / 255.0)
}

fn norm2(e: &[f64; 3]) -> f64 {
    e[0] * e[0] + e[1] * e[1] + e[2] * e[2]
}
