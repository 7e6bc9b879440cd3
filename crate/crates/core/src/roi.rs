//! Action-guided region of interest.
//!
//! The end-effector's tool axis is projected through a pinhole camera into
//! the image plane, and every pixel is weighted by how closely its offset
//! from the projected base pixel lines up with the projected direction:
//!
//! ```text
//! psi  = cos angle((u - u0, v - v0), (du, dv))
//! mask = max((psi - cos(alpha/2)) / (1 - cos(alpha/2)), 0)
//! ```
//!
//! Conventions: quaternions are `(w, x, y, z)`, right-handed, expressing the
//! tool frame in the world frame. Cameras map world points with
//! `p_c = R_wc * p_w + t_wc`. Pixel `(u, v)` of a mask is column `u`, row `v`
//! at integer coordinates.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{AtaError, Result};
use crate::mask::PixelMask;

/// Minimum camera-frame depth for a point to count as in front of the camera.
pub const MIN_DEPTH: f64 = 1e-6;
/// Projected directions shorter than this (pixels) are degenerate.
pub const MIN_RAY_LENGTH: f64 = 1e-6;
const UNIT_TOLERANCE: f64 = 1e-6;

/// End-effector position (meters) and orientation (unit quaternion, w-first).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EefPose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl EefPose {
    pub fn new(position: [f64; 3], orientation: [f64; 4]) -> Result<Self> {
        let pose = Self { position, orientation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn at(position: [f64; 3]) -> Self {
        Self {
            position,
            orientation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.position.iter().chain(&self.orientation).any(|v| !v.is_finite()) {
            return Err(AtaError::numeric("pose contains non-finite values"));
        }
        let norm = self.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(AtaError::contract(format!(
                "orientation quaternion has norm {norm}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

/// Pinhole camera with world-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    /// World-to-camera translation, meters.
    pub translation: [f64; 3],
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(AtaError::contract(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(AtaError::contract("camera image size must be non-zero"));
        }
        let r = self.rotation_matrix();
        let orth = (r * r.transpose() - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if orth > UNIT_TOLERANCE || (det - 1.0).abs() > UNIT_TOLERANCE {
            return Err(AtaError::contract(format!(
                "camera rotation is not a proper rotation (|RRt - I| = {orth:.2e}, det = {det})"
            )));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`; image rows run along `down`
    /// (projected onto the image plane).
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        down: [f64; 3],
        focal: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| AtaError::contract("look_at target coincides with eye"))?;
        let right = Vector3::from(down)
            .cross(&forward)
            .try_normalize(1e-12)
            .ok_or_else(|| AtaError::contract("look_at down vector is parallel to the view direction"))?;
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        let cam = Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.x, t.y, t.z],
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn to_camera(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p_world + Vector3::from(self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * Vector3::from(self.translation))
    }

    /// Intersects the viewing ray through pixel `(u, v)` with the world plane
    /// `p[axis] = offset`.
    pub fn unproject_to_plane(&self, u: f64, v: f64, axis: usize, offset: f64) -> Result<Vector3<f64>> {
        let dir_c = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let dir_w = self.rotation_matrix().transpose() * dir_c;
        let origin = self.center();
        if dir_w[axis].abs() < 1e-12 {
            return Err(AtaError::numeric(format!("pixel ({u}, {v}) ray is parallel to the plane")));
        }
        let s = (offset - origin[axis]) / dir_w[axis];
        if s <= 0.0 {
            return Err(AtaError::contract(format!(
                "pixel ({u}, {v}) ray meets the plane behind the camera"
            )));
        }
        Ok(origin + dir_w * s)
    }
}

/// Which tool-frame axis defines the motion direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolAxis {
    X,
    Y,
    #[default]
    Z,
}

impl ToolAxis {
    fn unit(self) -> Vector3<f64> {
        match self {
            ToolAxis::X => Vector3::x(),
            ToolAxis::Y => Vector3::y(),
            ToolAxis::Z => Vector3::z(),
        }
    }
}

/// Opening angle (degrees) and ray length (meters) of the conic sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiParams {
    pub alpha: f64,
    pub z_depth: f64,
    pub tool_axis: ToolAxis,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self {
            alpha: 150.0,
            z_depth: 0.5,
            tool_axis: ToolAxis::Z,
        }
    }
}

impl RoiParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.z_depth > 0.0) || !self.z_depth.is_finite() {
            return Err(AtaError::contract(format!("z_depth must be positive, got {}", self.z_depth)));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 360.0) {
        return Err(AtaError::contract(format!("opening angle must be in (0, 360) degrees, got {alpha}")));
    }
    Ok(())
}

/// Base pixel and pixel-plane direction of the projected tool axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedRay {
    pub base: [f64; 2],
    pub direction: [f64; 2],
    pub degenerate: bool,
}

impl ProjectedRay {
    pub fn new(base: [f64; 2], direction: [f64; 2]) -> Self {
        let len = direction[0].hypot(direction[1]);
        Self {
            base,
            direction,
            degenerate: !(len >= MIN_RAY_LENGTH),
        }
    }
}

/// Rotation matrix of a (normalized internally) `(w, x, y, z)` quaternion.
pub fn rotation_from_quaternion(q: [f64; 4]) -> Result<Matrix3<f64>> {
    let [w, x, y, z] = q;
    let quat = Quaternion::new(w, x, y, z);
    let norm = quat.norm();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(AtaError::numeric(format!("cannot build a rotation from quaternion {q:?}")));
    }
    Ok(UnitQuaternion::from_quaternion(quat).to_rotation_matrix().into_inner())
}

/// World-frame direction of the selected tool axis.
pub fn tool_direction(pose: &EefPose, axis: ToolAxis) -> Result<Vector3<f64>> {
    pose.validate()?;
    Ok(rotation_from_quaternion(pose.orientation)? * axis.unit())
}

pub fn project_point(cam: &CameraModel, p_world: &Vector3<f64>) -> Result<[f64; 2]> {
    let pc = cam.to_camera(p_world);
    if !(pc.z > MIN_DEPTH) {
        return Err(AtaError::BehindCamera { depth: pc.z });
    }
    Ok([cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy])
}

/// Projects the end-effector position and the tip `x + z_depth * d`.
///
/// A tip behind the camera yields a degenerate ray rather than an error.
pub fn project_ray(cam: &CameraModel, pose: &EefPose, params: &RoiParams) -> Result<ProjectedRay> {
    params.validate()?;
    let base_w = pose.position();
    let base = project_point(cam, &base_w)?;
    let tip_w = base_w + tool_direction(pose, params.tool_axis)? * params.z_depth;
    match project_point(cam, &tip_w) {
        Ok(tip) => Ok(ProjectedRay::new(base, [tip[0] - base[0], tip[1] - base[1]])),
        Err(AtaError::BehindCamera { .. }) => Ok(ProjectedRay {
            base,
            direction: [0.0, 0.0],
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

/// Soft conic-sector mask over a `width x height` image.
pub fn conic_mask(ray: &ProjectedRay, alpha: f64, width: u32, height: u32) -> Result<PixelMask> {
    check_alpha(alpha)?;
    let len = ray.direction[0].hypot(ray.direction[1]);
    if ray.degenerate || !(len >= MIN_RAY_LENGTH) {
        return Err(AtaError::DegenerateRay { length: len });
    }
    let (dx, dy) = (ray.direction[0] / len, ray.direction[1] / len);
    let cos_half = (alpha.to_radians() / 2.0).cos();
    let span = 1.0 - cos_half;
    let [u0, v0] = ray.base;

    let mut values = Vec::with_capacity(width as usize * height as usize);
    for v in 0..height {
        let oy = v as f64 - v0;
        for u in 0..width {
            let ox = u as f64 - u0;
            let r = ox.hypot(oy);
            let m = if r == 0.0 {
                1.0
            } else {
                let psi = (ox * dx + oy * dy) / r;
                ((psi - cos_half) / span).clamp(0.0, 1.0)
            };
            values.push(m);
        }
    }
    PixelMask::new(width, height, values)
}

/// Conic mask, or all ones when the ray is degenerate (nothing suppressed).
pub fn conic_mask_or_identity(ray: &ProjectedRay, alpha: f64, width: u32, height: u32) -> Result<PixelMask> {
    match conic_mask(ray, alpha, width, height) {
        Err(AtaError::DegenerateRay { length }) => {
            log::warn!("projected tool direction is degenerate (length {length:.2e}); using an all-ones mask");
            PixelMask::constant(width, height, 1.0)
        }
        other => other,
    }
}
