use serde::{Deserialize, Serialize};

use super::transform::{normalize_contrast, resize_bilinear};
use super::{GrayImage, ImagePreprocConfig};
use crate::error::{Error, Result};

/// Symmetric, normalized gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    values: Vec<f64>,
}

impl Glcm {
    /// Wraps a raw `levels x levels` matrix without normalizing it.
    pub fn from_values(levels: usize, values: Vec<f64>) -> Result<Self> {
        if levels == 0 || values.len() != levels * levels {
            return Err(Error::shape(format!(
                "{} entries for a {levels}x{levels} matrix",
                values.len()
            )));
        }
        Ok(Self { levels, values })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.levels + j]
    }
}

/// Co-occurrence counts of quantized pairs `(p[y][x], p[y+dy][x+dx])`,
/// symmetrized with the transpose and normalized to unit mass. Pixels
/// quantize to `floor(p * levels / 256)`.
pub fn glcm(img: &GrayImage, offset: (i32, i32), levels: usize) -> Result<Glcm> {
    if !(2..=256).contains(&levels) {
        return Err(Error::invalid(format!("gray levels must lie in [2, 256], got {levels}")));
    }
    if offset == (0, 0) {
        return Err(Error::invalid("GLCM offset must be non-zero"));
    }
    let (dy, dx) = (offset.0 as isize, offset.1 as isize);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let quant: Vec<usize> = img.pixels().iter().map(|&p| p as usize * levels / 256).collect();

    let mut counts = vec![0u64; levels * levels];
    let mut pairs = 0u64;
    for y in 0.max(-dy)..h.min(h - dy) {
        for x in 0.max(-dx)..w.min(w - dx) {
            let a = quant[(y * w + x) as usize];
            let b = quant[((y + dy) * w + x + dx) as usize];
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::invalid(format!(
            "offset {offset:?} leaves no pixel pairs in a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let total = (2 * pairs) as f64;
    let values = counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(Glcm { levels, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaralickFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub entropy: f64,
}

impl HaralickFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [self.contrast, self.correlation, self.energy, self.homogeneity, self.entropy]
    }
}

/// Texture statistics of a unit-mass co-occurrence matrix. Entropy uses the
/// natural log with `0 ln 0 = 0`; correlation is 0 when either marginal has
/// zero variance.
pub fn haralick(m: &Glcm) -> Result<HaralickFeatures> {
    if m.values.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("co-occurrence matrix has negative or non-finite entries"));
    }
    let mass: f64 = m.values.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("co-occurrence matrix sums to {mass}, not 1")));
    }
    let g = m.levels;
    let (mut contrast, mut energy, mut homogeneity, mut entropy) = (0.0, 0.0, 0.0, 0.0);
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for i in 0..g {
        for j in 0..g {
            let p = m.get(i, j);
            if p == 0.0 {
                continue;
            }
            let diff = i as f64 - j as f64;
            contrast += p * diff * diff;
            energy += p * p;
            homogeneity += p / (1.0 + diff * diff);
            entropy -= p * p.ln();
            mu_i += i as f64 * p;
            mu_j += j as f64 * p;
        }
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..g {
        for j in 0..g {
            let p = m.get(i, j);
            if p == 0.0 {
                continue;
            }
            let (di, dj) = (i as f64 - mu_i, j as f64 - mu_j);
            var_i += di * di * p;
            var_j += dj * dj * p;
            cov += di * dj * p;
        }
    }
    let correlation = if var_i > 0.0 && var_j > 0.0 {
        (cov / (var_i.sqrt() * var_j.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(HaralickFeatures {
        contrast,
        correlation,
        energy,
        homogeneity,
        entropy: entropy.max(0.0),
    })
}

/// Contrast normalization, resize, per-offset Haralick 5-tuples, then the
/// resized image's mean and standard deviation on a `[0, 1]` scale.
pub fn extract_features(img: &GrayImage, config: &ImagePreprocConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let normalized = normalize_contrast(img);
    let resized = resize_bilinear(&normalized, config.target_height, config.target_width)?;
    let mut out = Vec::with_capacity(config.feature_len());
    for &offset in &config.offsets {
        out.extend(haralick(&glcm(&resized, offset, config.gray_levels)?)?.to_array());
    }
    // integer moments keep the constant-image std at exactly zero
    let n = resized.pixels().len() as u128;
    let sum: u128 = resized.pixels().iter().map(|&p| p as u128).sum();
    let sum_sq: u128 = resized.pixels().iter().map(|&p| (p as u128) * (p as u128)).sum();
    let mean = sum as f64 / (n as f64 * 255.0);
    let var = (n * sum_sq - sum * sum) as f64 / ((n * n) as f64 * 255.0 * 255.0);
    out.push(mean);
    out.push(var.sqrt());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= TOL
    }

    #[test]
    fn constant_image_single_cell() {
        let img = GrayImage::filled(5, 4, 77).unwrap();
        for offset in [(0, 1), (1, 0), (1, 1), (1, -1), (2, -3)] {
            let m = glcm(&img, offset, 8).unwrap();
            let level = 77 * 8 / 256;
            assert_eq!(m.get(level, level), 1.0);
            assert_eq!(m.values().iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn checkerboard_glcm() {
        let img = GrayImage::from_rows(&[&[0, 255], &[255, 0]]).unwrap();
        let m = glcm(&img, (0, 1), 2).unwrap();
        assert_eq!(m.values(), [0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn no_pairs_is_error() {
        let img = GrayImage::filled(1, 1, 3).unwrap();
        assert!(glcm(&img, (0, 1), 8).is_err());
        assert!(glcm(&img, (0, 0), 8).is_err());
        assert!(glcm(&GrayImage::filled(2, 2, 3).unwrap(), (0, 1), 1).is_err());
    }

    #[test]
    fn haralick_degenerate() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let f = haralick(&Glcm::from_values(3, v).unwrap()).unwrap();
        assert_eq!(f.to_array(), [0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn haralick_checkerboard() {
        let f = haralick(&Glcm::from_values(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap()).unwrap();
        assert!(close(f.contrast, 1.0));
        assert!(close(f.energy, 0.5));
        assert!(close(f.homogeneity, 0.5));
        assert!(close(f.entropy, std::f64::consts::LN_2));
        assert!(close(f.correlation, -1.0));
    }

    #[test]
    fn haralick_uniform() {
        let f = haralick(&Glcm::from_values(2, vec![0.25; 4]).unwrap()).unwrap();
        assert!(close(f.contrast, 0.5));
        assert!(close(f.energy, 0.25));
        assert!(close(f.homogeneity, 0.75));
        assert!(close(f.entropy, 4f64.ln()));
        assert!(close(f.correlation, 0.0));
    }

    #[test]
    fn haralick_rejects_non_stochastic() {
        assert!(haralick(&Glcm::from_values(2, vec![0.5; 4]).unwrap()).is_err());
        assert!(haralick(&Glcm::from_values(2, vec![1.5, -0.5, 0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn feature_vector_shape_and_constant_case() {
        let cfg = ImagePreprocConfig::default();
        let img = GrayImage::filled(40, 30, 90).unwrap();
        let f = extract_features(&img, &cfg).unwrap();
        assert_eq!(f.len(), 22);
        for tuple in f[..20].chunks(5) {
            assert_eq!(tuple, [0.0, 0.0, 1.0, 1.0, 0.0]);
        }
        assert!(close(f[20], 90.0 / 255.0));
        assert_eq!(f[21], 0.0);
        assert_eq!(f, extract_features(&img, &cfg).unwrap());
    }
}
