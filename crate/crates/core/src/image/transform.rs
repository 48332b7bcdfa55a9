use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GrayImage, ImagePreprocConfig};
use crate::error::{Error, Result};

fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear sample at a continuous source position; coordinates outside the
/// image clamp to the nearest edge pixel.
fn sample_bilinear(img: &GrayImage, sx: f64, sy: f64) -> f64 {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let p = |x, y| f64::from(img.get(x, y));
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Linear stretch of `[min, max]` onto `[0, 255]`, rounding half-up.
/// Constant images come back unchanged.
pub fn normalize_contrast(img: &GrayImage) -> GrayImage {
    let min = *img.pixels().iter().min().expect("images are non-empty");
    let max = *img.pixels().iter().max().expect("images are non-empty");
    if min == max {
        return img.clone();
    }
    let range = u32::from(max - min);
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| ((2 * 255 * u32::from(v - min) + range) / (2 * range)) as u8)
        .collect();
    GrayImage { pixels, ..img.clone() }
}

/// Bilinear resize with the pixel-center convention
/// `src = (dst + 0.5) * src_size / dst_size - 0.5`.
pub fn resize_bilinear(img: &GrayImage, height: usize, width: usize) -> Result<GrayImage> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    if height == img.height() && width == img.width() {
        return Ok(img.clone());
    }
    let scale_y = img.height() as f64 / height as f64;
    let scale_x = img.width() as f64 / width as f64;
    let mut pixels = Vec::with_capacity(height * width);
    for y in 0..height {
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        for x in 0..width {
            let sx = (x as f64 + 0.5) * scale_x - 0.5;
            pixels.push(round_half_up(sample_bilinear(img, sx, sy)));
        }
    }
    GrayImage::new(width, height, pixels)
}

pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let pixels = img
        .pixels()
        .chunks(img.width())
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    GrayImage { pixels, ..img.clone() }
}

/// Rotation about the image center by `degrees`, bilinear resampled with
/// edge clamping.
pub fn rotate(img: &GrayImage, degrees: f64) -> GrayImage {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..img.height() {
        let dy = y as f64 - cy;
        for x in 0..img.width() {
            let dx = x as f64 - cx;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            pixels.push(round_half_up(sample_bilinear(img, sx, sy)));
        }
    }
    GrayImage { pixels, ..img.clone() }
}

/// Zoom about the center keeping the frame size. `factor < 1` crops the
/// center and scales it up; `factor > 1` shrinks the frame onto an
/// edge-clamped canvas.
pub fn zoom(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(format!("zoom factor must be positive, got {factor}")));
    }
    let (w, h) = (img.width(), img.height());
    if factor < 1.0 {
        let cw = ((w as f64 * factor).round() as usize).clamp(1, w);
        let ch = ((h as f64 * factor).round() as usize).clamp(1, h);
        let (left, top) = ((w - cw) / 2, (h - ch) / 2);
        let mut crop = Vec::with_capacity(cw * ch);
        for y in top..top + ch {
            crop.extend_from_slice(&img.pixels()[y * w + left..y * w + left + cw]);
        }
        resize_bilinear(&GrayImage::new(cw, ch, crop)?, h, w)
    } else if factor > 1.0 {
        let sw = ((w as f64 / factor).round() as usize).clamp(1, w);
        let sh = ((h as f64 / factor).round() as usize).clamp(1, h);
        let small = resize_bilinear(img, sh, sw)?;
        let (left, top) = (((w - sw) / 2) as isize, ((h - sh) / 2) as isize);
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h as isize {
            for x in 0..w as isize {
                pixels.push(small.get_clamped(x - left, y - top));
            }
        }
        GrayImage::new(w, h, pixels)
    } else {
        Ok(img.clone())
    }
}

/// The original followed by a horizontal flip (when enabled), one random
/// rotation and one random zoom, all drawn from `seed`.
pub fn augment(img: &GrayImage, config: &ImagePreprocConfig, seed: u64) -> Result<Vec<GrayImage>> {
    config.validate()?;
    let aug = &config.augmentation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = aug.max_rotation_degrees;
    let angle = if max > 0.0 { rng.random_range(-max..=max) } else { 0.0 };
    let (lo, hi) = aug.zoom_range;
    let factor = if hi > lo { rng.random_range(lo..=hi) } else { lo };

    let mut out = vec![img.clone()];
    if aug.horizontal_flip {
        out.push(flip_horizontal(img));
    }
    out.push(rotate(img, angle));
    out.push(zoom(img, factor)?);
    Ok(out)
}
