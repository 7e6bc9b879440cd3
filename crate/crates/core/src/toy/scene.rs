use image::Rgb;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::attention::GridShape;
use crate::compositor::Image;
use crate::error::{AtaError, Result};
use crate::roi::{project_point, CameraModel, EefPose};

/// World axis normal to the table plane (world frame: x right, y down, z forward).
pub const TABLE_NORMAL_AXIS: usize = 1;
/// Height of the table plane along [`TABLE_NORMAL_AXIS`].
pub const TABLE_LEVEL: f64 = 0.0;
/// Side of the square end-effector marker, pixels.
pub const MARKER_SIZE: u32 = 6;
pub const MARKER_COLOR: [u8; 3] = [255, 255, 255];

/// A colored block occupying one patch cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub color: [u8; 3],
    /// `[row, col]` in the patch grid.
    pub cell: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [-0.6, -0.3, -0.2],
            max: [0.6, 0.3, 1.3],
        }
    }
}

impl Workspace {
    pub fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| p[i].clamp(self.min[i], self.max[i]))
    }
}

/// A tabletop scene: uniform table, colored blocks on patch cells, and a
/// camera looking at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// `[rows, cols]` of the patch grid.
    pub grid: [usize; 2],
    pub table_color: [u8; 3],
    pub target: SceneObject,
    #[serde(default)]
    pub distractors: Vec<SceneObject>,
    pub eef_start: [f64; 3],
    #[serde(default = "identity_quaternion")]
    pub eef_orientation: [f64; 4],
    pub camera: CameraModel,
    #[serde(default)]
    pub workspace: Workspace,
    /// Generator seed this scene came from (0 for hand-written scenes).
    #[serde(default)]
    pub seed: u64,
}

fn identity_quaternion() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [rows, cols] = self.grid;
        if self.width == 0 || self.height == 0 || rows == 0 || cols == 0 {
            return Err(AtaError::contract("scene image and grid must be non-empty"));
        }
        if rows > self.height as usize || cols > self.width as usize {
            return Err(AtaError::contract(format!(
                "{rows}x{cols} grid is finer than the {}x{} image",
                self.width, self.height
            )));
        }
        if self.camera.width != self.width || self.camera.height != self.height {
            return Err(AtaError::contract(format!(
                "camera is {}x{} but the scene renders {}x{}",
                self.camera.width, self.camera.height, self.width, self.height
            )));
        }
        self.camera.validate()?;
        EefPose::new(self.eef_start, self.eef_orientation)?;
        let in_grid = |o: &SceneObject| o.cell[0] < rows && o.cell[1] < cols;
        if !in_grid(&self.target) {
            return Err(AtaError::contract(format!("target cell {:?} outside the grid", self.target.cell)));
        }
        for d in &self.distractors {
            if !in_grid(d) {
                return Err(AtaError::contract(format!("distractor cell {:?} outside the grid", d.cell)));
            }
            if d.cell == self.target.cell {
                return Err(AtaError::contract(format!("distractor shares the target cell {:?}", d.cell)));
            }
        }
        Ok(())
    }

    pub fn grid_shape(&self) -> GridShape {
        GridShape::new(self.grid[0], self.grid[1])
    }

    /// Pixel bounds `(x0, x1, y0, y1)`, half-open, of a patch cell.
    pub fn cell_bounds(&self, cell: [usize; 2]) -> (u32, u32, u32, u32) {
        cell_bounds(self.width, self.height, self.grid_shape(), cell)
    }

    /// World point on the table below the center of a cell.
    pub fn cell_world(&self, cell: [usize; 2]) -> Result<Vector3<f64>> {
        cell_world(&self.camera, self.width, self.height, self.grid_shape(), cell)
    }

    pub fn target_world(&self) -> Result<Vector3<f64>> {
        self.cell_world(self.target.cell)
    }

    pub fn instruction(&self) -> String {
        color_token(self.target.color)
    }
}

pub fn cell_bounds(width: u32, height: u32, grid: GridShape, cell: [usize; 2]) -> (u32, u32, u32, u32) {
    let edge = |k: usize, n: usize, len: u32| (k as u64 * len as u64 / n as u64) as u32;
    (
        edge(cell[1], grid.cols, width),
        edge(cell[1] + 1, grid.cols, width),
        edge(cell[0], grid.rows, height),
        edge(cell[0] + 1, grid.rows, height),
    )
}

pub fn cell_world(cam: &CameraModel, width: u32, height: u32, grid: GridShape, cell: [usize; 2]) -> Result<Vector3<f64>> {
    let (x0, x1, y0, y1) = cell_bounds(width, height, grid, cell);
    // pixel k is centered on coordinate k
    let u = (x0 + x1 - 1) as f64 / 2.0;
    let v = (y0 + y1 - 1) as f64 / 2.0;
    cam.unproject_to_plane(u, v, TABLE_NORMAL_AXIS, TABLE_LEVEL)
}

/// `#rrggbb` token naming a color.
pub fn color_token(color: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", color[0], color[1], color[2])
}

/// Parses the color token at the end of an instruction: either `#rrggbb` or
/// one of a few color names.
pub fn parse_color_token(instruction: &str) -> Result<[u8; 3]> {
    let token = instruction
        .split_whitespace()
        .last()
        .ok_or_else(|| AtaError::contract("empty instruction"))?
        .trim_end_matches('.')
        .to_ascii_lowercase();
    if let Some(hex) = token.strip_prefix('#') {
        if hex.len() == 6 && hex.chars().all(|c| c.is_ascii_hexdigit()) {
            let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
            return Ok([byte(0), byte(2), byte(4)]);
        }
    }
    NAMED_COLORS
        .iter()
        .find(|(name, _)| *name == token)
        .map(|(_, c)| *c)
        .ok_or_else(|| AtaError::contract(format!("unknown color token {token:?}")))
}

pub const NAMED_COLORS: [(&str, [u8; 3]); 8] = [
    ("red", [200, 50, 50]),
    ("green", [60, 170, 60]),
    ("blue", [50, 70, 200]),
    ("yellow", [200, 190, 50]),
    ("orange", [220, 120, 40]),
    ("purple", [140, 60, 180]),
    ("cyan", [50, 180, 190]),
    ("magenta", [200, 60, 170]),
];

/// Mutable part of the toy world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyState {
    pub eef: [f64; 3],
    pub grip: f64,
    pub step: usize,
}

impl ToyState {
    pub fn start(scene: &SceneSpec) -> Self {
        Self {
            eef: scene.eef_start,
            grip: 0.0,
            step: 0,
        }
    }
}

/// Rasterizes the table, the blocks and the end-effector marker.
pub fn render(scene: &SceneSpec, state: &ToyState) -> Image {
    let mut img = Image::from_pixel(scene.width, scene.height, Rgb(scene.table_color));
    for obj in scene.distractors.iter().chain(std::iter::once(&scene.target)) {
        let (x0, x1, y0, y1) = scene.cell_bounds(obj.cell);
        fill(&mut img, x0, x1, y0, y1, obj.color);
    }
    if let Ok([u, v]) = project_point(&scene.camera, &Vector3::from(state.eef)) {
        let half = (MARKER_SIZE / 2) as f64;
        let x0 = (u.round() - half).max(0.0);
        let y0 = (v.round() - half).max(0.0);
        let x1 = (u.round() + half).min(scene.width as f64);
        let y1 = (v.round() + half).min(scene.height as f64);
        if x0 < x1 && y0 < y1 {
            fill(&mut img, x0 as u32, x1 as u32, y0 as u32, y1 as u32, MARKER_COLOR);
        }
    }
    img
}

fn fill(img: &mut Image, x0: u32, x1: u32, y0: u32, y1: u32, color: [u8; 3]) {
    for y in y0..y1 {
        for x in x0..x1 {
            img.put_pixel(x, y, Rgb(color));
        }
    }
}
