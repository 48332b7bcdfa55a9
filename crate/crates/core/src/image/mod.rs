//! Grayscale ultrasound frames: PGM decoding, contrast normalization,
//! resizing, augmentation and GLCM texture features.

mod pgm;
mod texture;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pgm::{encode_pgm, load_pgm};
pub use texture::{extract_features, glcm, haralick, Glcm, HaralickFeatures};
pub use transform::{augment, flip_horizontal, normalize_contrast, resize_bilinear, rotate, zoom};

/// 8-bit grayscale image, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("ragged pixel rows"));
        }
        Self::new(width, rows.len(), rows.concat())
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at clamped coordinates.
    pub(crate) fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub max_rotation_degrees: f64,
    pub horizontal_flip: bool,
    pub zoom_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            max_rotation_degrees: 10.0,
            horizontal_flip: true,
            zoom_range: (0.9, 1.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagePreprocConfig {
    pub target_height: usize,
    pub target_width: usize,
    pub gray_levels: usize,
    /// GLCM displacements as `(dy, dx)`.
    pub offsets: Vec<(i32, i32)>,
    pub augmentation: AugmentConfig,
    pub seed: u64,
}

impl Default for ImagePreprocConfig {
    fn default() -> Self {
        Self {
            target_height: 128,
            target_width: 128,
            gray_levels: 32,
            offsets: vec![(0, 1), (1, 0), (1, 1), (1, -1)],
            augmentation: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl ImagePreprocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_height == 0 || self.target_width == 0 {
            return Err(Error::invalid("target dimensions must be positive"));
        }
        if !(2..=256).contains(&self.gray_levels) {
            return Err(Error::invalid("gray_levels must lie in [2, 256]"));
        }
        if self.offsets.is_empty() || self.offsets.contains(&(0, 0)) {
            return Err(Error::invalid("offsets must be non-empty and non-zero"));
        }
        let (lo, hi) = self.augmentation.zoom_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("zoom range must satisfy 0 < low <= high"));
        }
        let rot = self.augmentation.max_rotation_degrees;
        if !(rot >= 0.0 && rot.is_finite()) {
            return Err(Error::invalid("max_rotation_degrees must be finite and >= 0"));
        }
        Ok(())
    }

    /// Length of the vector produced by [`extract_features`].
    pub fn feature_len(&self) -> usize {
        5 * self.offsets.len() + 2
    }
}
