//! Blending observations against a neutral background, plus the Gaussian
//! blur used as a perturbation baseline.

use image::{Rgb, RgbImage};

use crate::error::{AtaError, Result};
use crate::mask::PixelMask;

/// 8-bit RGB observation.
pub type Image = RgbImage;

/// Mid-gray background level.
pub const DEFAULT_BG: u8 = 127;
/// Blur kernel side length.
pub const BLUR_KERNEL_SIZE: usize = 9;
pub const DEFAULT_BLUR_SIGMA: f64 = 2.0;

/// `round(m * img + (1 - m) * bg)` per channel, ties away from zero.
pub fn blend(img: &Image, mask: &PixelMask, bg: u8) -> Result<Image> {
    check_dims(img, mask)?;
    let bg = bg as f64;
    let mut out = img.clone();
    for (px, &m) in out.pixels_mut().zip(mask.values()) {
        for c in px.0.iter_mut() {
            *c = (m * *c as f64 + (1.0 - m) * bg).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

fn check_dims(img: &Image, mask: &PixelMask) -> Result<()> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(AtaError::structural(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Normalized 1-D Gaussian taps of length [`BLUR_KERNEL_SIZE`].
pub fn gaussian_kernel(sigma: f64) -> Result<[f64; BLUR_KERNEL_SIZE]> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(AtaError::contract(format!("blur sigma must be positive, got {sigma}")));
    }
    let radius = (BLUR_KERNEL_SIZE / 2) as f64;
    let mut k = [0.0; BLUR_KERNEL_SIZE];
    for (i, w) in k.iter_mut().enumerate() {
        let x = i as f64 - radius;
        *w = (-(x * x) / (2.0 * sigma * sigma)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    Ok(k)
}

/// Separable 9x9 Gaussian blur with clamped edges.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    let kernel = gaussian_kernel(sigma)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = BLUR_KERNEL_SIZE / 2;
    let src = img.as_raw();

    // horizontal pass kept in f64 so rounding happens once
    let mut tmp = vec![0.0f64; w * h * 3];
    let mut padded = vec![0.0f64; (w + 2 * r) * 3];
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for (px, out) in padded.chunks_exact_mut(3).enumerate() {
            let sx = px.saturating_sub(r).min(w - 1);
            for c in 0..3 {
                out[c] = row[sx * 3 + c] as f64;
            }
        }
        let dst = &mut tmp[y * w * 3..(y + 1) * w * 3];
        for (x, out) in dst.chunks_exact_mut(3).enumerate() {
            let window = &padded[x * 3..(x + BLUR_KERNEL_SIZE) * 3];
            let mut acc = [0.0; 3];
            for (tap, weight) in window.chunks_exact(3).zip(&kernel) {
                acc[0] += weight * tap[0];
                acc[1] += weight * tap[1];
                acc[2] += weight * tap[2];
            }
            out.copy_from_slice(&acc);
        }
    }

    let stride = w * 3;
    let mut out = vec![0u8; w * h * 3];
    let mut acc = vec![0.0f64; stride];
    for y in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (k, weight) in kernel.iter().enumerate() {
            let sy = (y + k).saturating_sub(r).min(h - 1);
            let row = &tmp[sy * stride..(sy + 1) * stride];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += weight * v;
            }
        }
        for (o, a) in out[y * stride..(y + 1) * stride].iter_mut().zip(&acc) {
            *o = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(Image::from_raw(img.width(), img.height(), out).expect("buffer sized from image"))
}

/// Semi-transparent red over every pixel with positive mask weight.
pub fn red_overlay(img: &Image, mask: &PixelMask) -> Result<Image> {
    check_dims(img, mask)?;
    let mut out = img.clone();
    for (px, &m) in out.pixels_mut().zip(mask.values()) {
        if m > 0.0 {
            let Rgb([r, g, b]) = *px;
            *px = Rgb([
                ((r as u16 + 255) / 2) as u8,
                (g as u16 / 2) as u8,
                (b as u16 / 2) as u8,
            ]);
        }
    }
    Ok(out)
}

/// Half-and-half composite of the image with a blue-to-red heat ramp.
pub fn heatmap_overlay(img: &Image, mask: &PixelMask) -> Result<Image> {
    check_dims(img, mask)?;
    let mut out = img.clone();
    for (px, &m) in out.pixels_mut().zip(mask.values()) {
        let heat = heat_color(m);
        for (c, h) in px.0.iter_mut().zip(heat) {
            *c = ((*c as f64 + h) / 2.0).round() as u8;
        }
    }
    Ok(out)
}

fn heat_color(m: f64) -> [f64; 3] {
    // blue -> cyan -> yellow -> red
    let m = m.clamp(0.0, 1.0);
    let (r, g, b) = if m < 1.0 / 3.0 {
        let t = m * 3.0;
        (0.0, t, 1.0)
    } else if m < 2.0 / 3.0 {
        let t = m * 3.0 - 1.0;
        (t, 1.0, 1.0 - t)
    } else {
        let t = m * 3.0 - 2.0;
        (1.0, 1.0 - t, 0.0)
    };
    [r * 255.0, g * 255.0, b * 255.0]
}
