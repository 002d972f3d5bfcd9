//! Linear image representation, pixel masks, and chromaticity conversion.
//!
//! Images are stored as three planar channels of `f64` linear intensities.
//! Double precision is deliberate: Minkowski pooling raises intensities to
//! powers up to ~20, which under- or overflows single precision on 16-bit
//! source ranges.

pub mod decode;
pub mod filter;

use crate::error::{Error, Result};
use crate::estimators::IlluminantEstimate;

/// Channel indices into [`LinearImage`] planes.
pub const RED: usize = 0;
/// See [`RED`].
pub const GREEN: usize = 1;
/// See [`RED`].
pub const BLUE: usize = 2;

/// A three-channel raster of nonnegative linear intensities.
///
/// Planes are row-major (`y * width + x`). `white_level` is the nominal
/// saturation intensity of the source encoding (255 for 8-bit, 65535 for
/// 16-bit), used by [`effective_mask`] to detect clipped pixels.
///
/// Invariants, enforced at construction: `width >= 1`, `height >= 1`, all
/// three planes hold exactly `width * height` samples, every sample is
/// finite and `>= 0`, and `white_level > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
    white_level: f64,
}

impl LinearImage {
    pub fn new(
        width: usize,
        height: usize,
        planes: [Vec<f64>; 3],
        white_level: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        let len = width * height;
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != len {
                return Err(Error::InvalidImage(format!(
                    "channel {c} has {} samples, expected {len}",
                    plane.len()
                )));
            }
            if let Some(bad) = plane.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidImage(format!(
                    "channel {c} contains a non-finite or negative sample {bad}"
                )));
            }
        }
        if white_level <= 0.0 || !white_level.is_finite() {
            return Err(Error::InvalidImage(format!(
                "white level must be positive and finite, got {white_level}"
            )));
        }
        Ok(Self {
            width,
            height,
            planes,
            white_level,
        })
    }

    /// Builds an image by evaluating `f(x, y) -> [r, g, b]` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        white_level: f64,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let len = width.checked_mul(height).unwrap_or(0);
        let mut planes = [
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        ];
        for y in 0..height {
            for x in 0..width {
                let rgb = f(x, y);
                for c in 0..3 {
                    planes[c].push(rgb[c]);
                }
            }
        }
        Self::new(width, height, planes, white_level)
    }

    /// A single-color image; handy for tests and degenerate cases.
    pub fn constant(width: usize, height: usize, rgb: [f64; 3], white_level: f64) -> Result<Self> {
        Self::from_fn(width, height, white_level, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels per plane.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn white_level(&self) -> f64 {
        self.white_level
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn sample(&self, channel: usize, x: usize, y: usize) -> f64 {
        self.planes[channel][y * self.width + x]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }
}

/// Per-pixel inclusion flags for an image of matching dimensions.
///
/// At least one pixel must be included; an all-excluded mask is invalid
/// input everywhere in this library.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    included: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, included: Vec<bool>) -> Result<Self> {
        if included.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} flags, expected {}",
                included.len(),
                width * height
            )));
        }
        if !included.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            width,
            height,
            included,
        })
    }

    pub fn all_included(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            included: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.included
    }

    pub fn is_included(&self, x: usize, y: usize) -> bool {
        self.included[y * self.width + x]
    }

    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn matches(&self, image: &LinearImage) -> bool {
        self.width == image.width() && self.height == image.height()
    }
}

/// Intensity-normalized color: `(r, g, b) = (R, G, B) / (R + G + B)`.
///
/// Components are in `[0, 1]` and sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chromaticity {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Chromaticity {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        for v in [r, g, b] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "chromaticity component {v} outside [0, 1]"
                )));
            }
        }
        if (r + g + b - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "chromaticity components sum to {}, expected 1",
                r + g + b
            )));
        }
        Ok(Self { r, g, b })
    }
}

/// Projects an illuminant direction onto the chromaticity plane.
///
/// Scale-invariant: `to_chromaticity(k * e) == to_chromaticity(e)` for any
/// `k > 0`. The estimate's own invariant (at least one strictly positive
/// component) guarantees a nonzero divisor.
pub fn to_chromaticity(e: &IlluminantEstimate) -> Chromaticity {
    let sum = e.red() + e.green() + e.blue();
    Chromaticity {
        r: e.red() / sum,
        g: e.green() / sum,
        b: e.blue() / sum,
    }
}

/// Combines an optional provided mask with saturation and dark-pixel
/// exclusion.
///
/// A pixel is excluded when the provided mask excludes it, when any channel
/// is at or above `saturation_fraction * white_level` (clipped pixels break
/// the linear model), or when all channels are at or below `dark_level`.
///
/// Fails with [`Error::EmptyMask`] when nothing survives.
pub fn effective_mask(
    image: &LinearImage,
    mask: Option<&PixelMask>,
    saturation_fraction: f64,
    dark_level: f64,
) -> Result<PixelMask> {
    if !(saturation_fraction > 0.0 && saturation_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "saturation fraction must be in (0, 1], got {saturation_fraction}"
        )));
    }
    if dark_level < 0.0 || dark_level.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "dark level must be >= 0, got {dark_level}"
        )));
    }
    if let Some(m) = mask {
        if !m.matches(image) {
            return Err(Error::InvalidInput(format!(
                "mask is {}x{} but image is {}x{}",
                m.width(),
                m.height(),
                image.width(),
                image.height()
            )));
        }
    }

    let saturation = saturation_fraction * image.white_level();
    let len = image.pixel_count();
    let (r, g, b) = (image.plane(RED), image.plane(GREEN), image.plane(BLUE));
    let mut included = Vec::with_capacity(len);
    for i in 0..len {
        let provided = mask.is_none_or(|m| m.flags()[i]);
        let saturated = r[i] >= saturation || g[i] >= saturation || b[i] >= saturation;
        let dark = r[i] <= dark_level && g[i] <= dark_level && b[i] <= dark_level;
        included.push(provided && !saturated && !dark);
    }
    PixelMask::new(image.width(), image.height(), included)
}
