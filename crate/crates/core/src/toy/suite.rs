//! Seeded scene generator and the fixed distractor scenario.
//!
//! A generated scene holds a target block, optionally a "lure" (same hue,
//! more saturated) and a few blocks of clearly different hue. Blocks never
//! touch each other or the image border, so blurring scales every block's
//! patch mean by the same factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{SceneObject, SceneSpec, Workspace};
use crate::error::{AtaError, Result};
use crate::roi::{CameraModel, EefPose, RoiParams};
use crate::scheduler::action_mask;

pub const DEFAULT_SIZE: u32 = 224;
pub const DEFAULT_GRID: [usize; 2] = [8, 8];
pub const TABLE_COLOR: [u8; 3] = [110, 110, 110];
pub const EEF_START: [f64; 3] = [0.0, 0.0, 0.12];

/// Camera above and behind the robot base, looking down the workspace.
pub fn default_camera(width: u32, height: u32) -> Result<CameraModel> {
    CameraModel::look_at(
        [0.0, -1.0, -0.3],
        [0.0, 0.0, 0.45],
        [0.0, 1.0, 0.0],
        380.0 * width as f64 / DEFAULT_SIZE as f64,
        width,
        height,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    pub width: u32,
    pub height: u32,
    pub grid: [usize; 2],
    /// Chance that a scene contains a lure.
    pub lure_probability: f64,
    /// Lure saturation relative to the target, `[lo, hi)`.
    pub lure_gain: [f64; 2],
    /// Largest lure hue offset, degrees.
    pub lure_hue_jitter: f64,
    /// Number of off-hue blocks, inclusive range.
    pub other_distractors: [usize; 2],
    /// Smallest hue difference between the target and an off-hue block, degrees.
    pub min_hue_gap: f64,
    /// Smallest action-mask weight at the target cell center.
    pub min_action_weight: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
            grid: DEFAULT_GRID,
            lure_probability: 0.6,
            lure_gain: [1.25, 1.4],
            lure_hue_jitter: 10.0,
            other_distractors: [1, 2],
            min_hue_gap: 100.0,
            min_action_weight: 0.3,
        }
    }
}

impl SuiteParams {
    pub fn validate(&self) -> Result<()> {
        let [rows, cols] = self.grid;
        if rows < 5 || cols < 5 {
            return Err(AtaError::contract(format!("suite grid must be at least 5x5, got {rows}x{cols}")));
        }
        if (self.width as usize) < cols || (self.height as usize) < rows {
            return Err(AtaError::contract("suite grid is finer than the image"));
        }
        if !(0.0..=1.0).contains(&self.lure_probability) {
            return Err(AtaError::contract("lure_probability must be in [0, 1]"));
        }
        if !(self.lure_gain[0] >= 1.0 && self.lure_gain[0] < self.lure_gain[1]) {
            return Err(AtaError::contract("lure_gain must be an increasing range starting at 1 or above"));
        }
        if self.other_distractors[0] > self.other_distractors[1] {
            return Err(AtaError::contract("other_distractors range is reversed"));
        }
        if !(0.0..=180.0).contains(&self.min_hue_gap) {
            return Err(AtaError::contract("min_hue_gap must be within [0, 180] degrees"));
        }
        Ok(())
    }
}

/// Color with the given hue (degrees), chroma amplitude and gray level.
pub fn hue_color(hue: f64, saturation: f64, lightness: f64) -> [u8; 3] {
    std::array::from_fn(|k| {
        let v = lightness + saturation * (hue - 120.0 * k as f64).to_radians().cos();
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// `n` scenes with seeds `base_seed`, `base_seed + 1`, ...
pub fn generate_suite(params: &SuiteParams, base_seed: u64, n: usize) -> Result<Vec<SceneSpec>> {
    params.validate()?;
    (0..n as u64)
        .map(|i| generate_scene(params, base_seed.wrapping_add(i)))
        .collect()
}

pub fn generate_scene(params: &SuiteParams, seed: u64) -> Result<SceneSpec> {
    const ATTEMPTS: usize = 1000;
    params.validate()?;
    let camera = default_camera(params.width, params.height)?;
    let start = EefPose::at(EEF_START);
    let guide = action_mask(&camera, &start, &RoiParams::default(), params.width, params.height)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [rows, cols] = params.grid;

    let mut scene = SceneSpec {
        width: params.width,
        height: params.height,
        grid: params.grid,
        table_color: TABLE_COLOR,
        target: SceneObject {
            color: [0; 3],
            cell: [0, 0],
        },
        distractors: Vec::new(),
        eef_start: EEF_START,
        eef_orientation: [1.0, 0.0, 0.0, 0.0],
        camera,
        workspace: Workspace::default(),
        seed,
    };

    let hue = rng.random_range(0.0..360.0);
    let sat = rng.random_range(50.0..70.0);
    scene.target.color = hue_color(hue, sat, rng.random_range(110.0..140.0));

    let mut placed: Vec<[usize; 2]> = Vec::new();
    let mut pick_cell = |rng: &mut ChaCha8Rng, accept: &dyn Fn([usize; 2]) -> bool| -> Result<[usize; 2]> {
        for _ in 0..ATTEMPTS {
            let cell = [rng.random_range(1..rows - 2), rng.random_range(1..cols - 1)];
            let clear = placed
                .iter()
                .all(|p| p[0].abs_diff(cell[0]) >= 2 || p[1].abs_diff(cell[1]) >= 2);
            if clear && accept(cell) {
                placed.push(cell);
                return Ok(cell);
            }
        }
        Err(AtaError::contract(format!("scene {seed}: no free cell after {ATTEMPTS} attempts")))
    };

    let probe = scene.clone();
    let reachable = |cell: [usize; 2]| {
        let (x0, x1, y0, y1) = probe.cell_bounds(cell);
        let weight = guide.get((x0 + x1) / 2, (y0 + y1) / 2);
        let inside = probe
            .cell_world(cell)
            .map(|p| probe.workspace.clamp(p.into()) == <[f64; 3]>::from(p))
            .unwrap_or(false);
        weight >= params.min_action_weight && inside
    };
    scene.target.cell = pick_cell(&mut rng, &reachable)?;

    if rng.random_bool(params.lure_probability) {
        let gain = rng.random_range(params.lure_gain[0]..params.lure_gain[1]);
        let jitter = rng.random_range(-params.lure_hue_jitter..=params.lure_hue_jitter);
        let color = hue_color(hue + jitter, gain * sat, rng.random_range(110.0..140.0));
        let cell = pick_cell(&mut rng, &|_| true)?;
        scene.distractors.push(SceneObject { color, cell });
    }
    let [lo, hi] = params.other_distractors;
    for _ in 0..rng.random_range(lo..=hi) {
        let gap = rng.random_range(params.min_hue_gap..=180.0);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let color = hue_color(
            hue + side * gap,
            rng.random_range(50.0..90.0),
            rng.random_range(100.0..150.0),
        );
        let cell = pick_cell(&mut rng, &|_| true)?;
        scene.distractors.push(SceneObject { color, cell });
    }
    scene.validate()?;
    Ok(scene)
}

/// Fixed scene whose unguided policy picks the lure while the
/// attention-masked frame leads to the target.
pub fn designed_scene() -> Result<SceneSpec> {
    let camera = default_camera(DEFAULT_SIZE, DEFAULT_SIZE)?;
    let scene = SceneSpec {
        width: DEFAULT_SIZE,
        height: DEFAULT_SIZE,
        grid: DEFAULT_GRID,
        table_color: TABLE_COLOR,
        target: SceneObject {
            color: hue_color(0.0, 60.0, 120.0),
            cell: [3, 2],
        },
        distractors: vec![
            SceneObject {
                color: hue_color(6.0, 80.0, 130.0),
                cell: [2, 5],
            },
            SceneObject {
                color: hue_color(200.0, 70.0, 120.0),
                cell: [5, 4],
            },
        ],
        eef_start: EEF_START,
        eef_orientation: [1.0, 0.0, 0.0, 0.0],
        camera,
        workspace: Workspace::default(),
        seed: 0,
    };
    scene.validate()?;
    Ok(scene)
}
