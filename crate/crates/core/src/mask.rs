//! Soft masks: z-scored sigmoid normalization of patch attention and
//! bilinear resampling to pixel resolution.

use image::GrayImage;

use crate::attention::PatchAttentionMap;
use crate::error::{AtaError, Result};

/// Below this standard deviation the map is treated as constant.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Pixel-resolution blend weights in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AtaError::structural(format!("mask must be non-empty, got {width}x{height}")));
        }
        if values.len() != width as usize * height as usize {
            return Err(AtaError::structural(format!(
                "{width}x{height} mask cannot hold {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AtaError::contract(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// 8-bit view, `round(255 * m)`.
    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.values.iter().map(|v| (v * 255.0).round() as u8).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("dimensions checked at construction")
    }

    /// Inverse of [`PixelMask::to_luma8`] up to quantization.
    pub fn from_luma8(img: &GrayImage) -> Result<Self> {
        let values = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
        Self::new(img.width(), img.height(), values)
    }
}

/// `sigmoid((psi - mean) / std)` elementwise, population statistics.
///
/// A (numerically) constant map becomes 0.5 everywhere.
pub fn normalize_sigmoid(psi: &PatchAttentionMap) -> Result<PatchAttentionMap> {
    if psi.is_empty() {
        return Err(AtaError::structural("cannot normalize an empty attention map"));
    }
    let n = psi.values.len() as f64;
    let mean = psi.values.iter().sum::<f64>() / n;
    let var = psi.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let values = if std < SIGMA_FLOOR {
        vec![0.5; psi.values.len()]
    } else {
        psi.values.iter().map(|v| sigmoid((v - mean) / std)).collect()
    };
    PatchAttentionMap::new(psi.rows, psi.cols, values, psi.layer_index)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Bilinear upsampling with half-pixel centers; samples outside the
/// outermost patch centers clamp to the edge.
pub fn upsample(mask: &PatchAttentionMap, width: u32, height: u32) -> Result<PixelMask> {
    if width == 0 || height == 0 || mask.is_empty() {
        return Err(AtaError::structural(format!(
            "cannot upsample a {}x{} grid to {width}x{height}",
            mask.rows, mask.cols
        )));
    }
    if let Some(v) = mask.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AtaError::contract(format!("mask value {v} outside [0, 1]")));
    }

    let xs: Vec<Tap> = (0..width).map(|x| Tap::new(x as f64 + 0.5, width, mask.cols)).collect();
    let ys: Vec<Tap> = (0..height).map(|y| Tap::new(y as f64 + 0.5, height, mask.rows)).collect();

    let mut values = Vec::with_capacity(width as usize * height as usize);
    for ty in &ys {
        let r0 = &mask.values[ty.i0 * mask.cols..(ty.i0 + 1) * mask.cols];
        let r1 = &mask.values[ty.i1 * mask.cols..(ty.i1 + 1) * mask.cols];
        for tx in &xs {
            let top = r0[tx.i0] + (r0[tx.i1] - r0[tx.i0]) * tx.frac;
            let bottom = r1[tx.i0] + (r1[tx.i1] - r1[tx.i0]) * tx.frac;
            values.push((top + (bottom - top) * ty.frac).clamp(0.0, 1.0));
        }
    }
    PixelMask::new(width, height, values)
}

/// Bilinear value at a continuous pixel coordinate (pixel `k` spans `[k, k+1)`).
pub fn sample_at(mask: &PatchAttentionMap, x: f64, y: f64, width: u32, height: u32) -> f64 {
    let tx = Tap::new(x, width, mask.cols);
    let ty = Tap::new(y, height, mask.rows);
    let at = |r: usize, c: usize| mask.values[r * mask.cols + c];
    let top = at(ty.i0, tx.i0) + (at(ty.i0, tx.i1) - at(ty.i0, tx.i0)) * tx.frac;
    let bottom = at(ty.i1, tx.i0) + (at(ty.i1, tx.i1) - at(ty.i1, tx.i0)) * tx.frac;
    top + (bottom - top) * ty.frac
}

/// Two source indices and a blend fraction along one axis.
struct Tap {
    i0: usize,
    i1: usize,
    frac: f64,
}

impl Tap {
    fn new(pixel_coord: f64, out_len: u32, in_len: usize) -> Self {
        let src = pixel_coord * in_len as f64 / out_len as f64 - 0.5;
        let max = (in_len - 1) as f64;
        let src = src.clamp(0.0, max);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(in_len - 1);
        Self {
            i0,
            i1,
            frac: src - i0 as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(rows: usize, cols: usize, values: Vec<f64>) -> PatchAttentionMap {
        PatchAttentionMap::new(rows, cols, values, 0).unwrap()
    }

    #[test]
    fn three_value_grid() {
        let out = normalize_sigmoid(&map(1, 3, vec![1.0, 2.0, 3.0])).unwrap();
        // sigma = sqrt(2/3), z = -/+ 1.2247
        let expected = [0.2271, 0.5, 0.7729];
        for (v, e) in out.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-4, "{v} vs {e}");
        }
    }

    #[test]
    fn constant_grid_is_half() {
        let out = normalize_sigmoid(&map(2, 2, vec![0.3; 4])).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.5));
        let single = normalize_sigmoid(&map(1, 1, vec![0.9])).unwrap();
        assert_eq!(single.values, vec![0.5]);
    }

    #[test]
    fn two_value_grid_is_plus_minus_one_sigma() {
        let out = normalize_sigmoid(&map(1, 2, vec![0.02, 0.7])).unwrap();
        assert!((out.values[0] - 0.2689).abs() < 1e-4);
        assert!((out.values[1] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn empty_grid_is_structural_error() {
        let empty = PatchAttentionMap::new(0, 0, vec![], 0).unwrap();
        assert!(matches!(normalize_sigmoid(&empty), Err(AtaError::Structural(_))));
    }

    #[test]
    fn upsample_constant_and_single_patch() {
        let m = upsample(&map(3, 5, vec![0.7; 15]), 31, 17).unwrap();
        assert!(m.values().iter().all(|v| (v - 0.7).abs() < 1e-15));
        let m = upsample(&map(1, 1, vec![0.35]), 8, 6).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.35));
    }

    #[test]
    fn checkerboard_center_is_half() {
        let checker = map(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        assert!((sample_at(&checker, 4.0, 4.0, 8, 8) - 0.5).abs() < 1e-12);
        // odd output: the middle pixel's center is the geometric center
        let m = upsample(&checker, 9, 9).unwrap();
        assert!((m.get(4, 4) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_matches_scalar_bilinear() {
        let checker = map(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let m = upsample(&checker, 8, 8).unwrap();
        for y in 0..8u32 {
            for x in 0..8u32 {
                // independent per-pixel evaluation with explicit clamping
                let sx = ((x as f64 + 0.5) * 2.0 / 8.0 - 0.5).clamp(0.0, 1.0);
                let sy = ((y as f64 + 0.5) * 2.0 / 8.0 - 0.5).clamp(0.0, 1.0);
                let v00 = 0.0;
                let v01 = 1.0;
                let v10 = 1.0;
                let v11 = 0.0;
                let oracle = v00 * (1.0 - sx) * (1.0 - sy) + v01 * sx * (1.0 - sy) + v10 * (1.0 - sx) * sy + v11 * sx * sy;
                assert!((m.get(x, y) - oracle).abs() <= 1e-9, "({x},{y})");
            }
        }
    }

    #[test]
    fn upsample_rejects_out_of_range() {
        assert!(matches!(upsample(&map(1, 2, vec![0.2, 1.2]), 4, 4), Err(AtaError::Contract(_))));
    }

    #[test]
    fn luma_round_trip_of_ones() {
        let m = PixelMask::constant(5, 4, 1.0).unwrap();
        let luma = m.to_luma8();
        assert!(luma.as_raw().iter().all(|&v| v == 255));
        assert_eq!(PixelMask::from_luma8(&luma).unwrap(), m);
    }

    proptest! {
        #[test]
        fn affine_invariance(values in proptest::collection::vec(0.0f64..1.0, 2..64), a in 0.1f64..10.0, b in -10.0f64..10.0) {
            let n = values.len();
            let base = normalize_sigmoid(&map(1, n, values.clone())).unwrap();
            let shifted = normalize_sigmoid(&map(1, n, values.iter().map(|v| a * v + b).collect())).unwrap();
            for (x, y) in base.values.iter().zip(&shifted.values) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn order_preserved(values in proptest::collection::vec(0.0f64..1.0, 2..64)) {
            let n = values.len();
            let out = normalize_sigmoid(&map(1, n, values.clone())).unwrap();
            for p in 0..n {
                for q in 0..n {
                    if values[p] < values[q] && out.values[p] != 0.5 {
                        prop_assert!(out.values[p] < out.values[q]);
                    }
                }
            }
        }

        #[test]
        fn upsample_stays_in_input_range(
            rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(0.0f64..1.0, 36),
            w in 1u32..40, h in 1u32..40,
        ) {
            let vals = seed[..rows * cols].to_vec();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let m = upsample(&map(rows, cols, vals), w, h).unwrap();
            for &v in m.values() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
