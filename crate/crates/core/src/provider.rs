//! Image access for the tuning layer.
//!
//! [`ImageProvider`] deliberately exposes no ground truth: the unsupervised
//! tuner takes a provider, so it cannot read labels even by accident. The
//! supervised paths carry ground truth in a separate, index-aligned slice.

use std::path::PathBuf;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::image::decode::{load_image, load_mask, DecodeOptions};
use crate::image::{effective_mask, LinearImage, PixelMask};

/// Pixel filtering applied when a provider materializes an image.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub decode: DecodeOptions,
    /// Pixels with any channel at or above this fraction of the white level
    /// are excluded as clipped.
    pub saturation_fraction: f64,
    /// Pixels with all channels at or below this intensity are excluded.
    pub dark_level: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            decode: DecodeOptions::default(),
            saturation_fraction: 0.98,
            dark_level: 0.0,
        }
    }
}

/// Read-only, index-addressed access to a dataset's images and masks.
///
/// Implementations must be deterministic: `load(i)` returns the same image
/// and mask every time. `Sync` so the grid evaluator can fan out.
pub trait ImageProvider: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn image_id(&self, index: usize) -> &str;

    /// Decodes the image and computes its effective mask.
    fn load(&self, index: usize) -> Result<(LinearImage, PixelMask)>;
}

/// Streams images from disk; nothing is cached, so datasets far larger than
/// memory evaluate in constant space per worker. Ground truth present in
/// the source records is dropped at construction.
pub struct DiskProvider {
    entries: Vec<(String, PathBuf, Option<PathBuf>)>,
    options: LoadOptions,
}

impl DiskProvider {
    pub fn new(records: &[DatasetRecord], options: LoadOptions) -> Self {
        let entries = records
            .iter()
            .map(|r| {
                (
                    r.image_id.clone(),
                    r.image_path.clone(),
                    r.mask_path.clone(),
                )
            })
            .collect();
        Self { entries, options }
    }
}

impl ImageProvider for DiskProvider {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn image_id(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    fn load(&self, index: usize) -> Result<(LinearImage, PixelMask)> {
        let (id, image_path, mask_path) = &self.entries[index];
        let inner = || -> Result<(LinearImage, PixelMask)> {
            let image = load_image(image_path, &self.options.decode)?;
            let provided = match mask_path {
                Some(p) => Some(load_mask(p, &self.options.decode)?),
                None => None,
            };
            let mask = effective_mask(
                &image,
                provided.as_ref(),
                self.options.saturation_fraction,
                self.options.dark_level,
            )?;
            Ok((image, mask))
        };
        inner().map_err(|e| Error::for_record(id.clone(), e))
    }
}

/// In-memory provider for synthetic data and tests.
pub struct MemoryProvider {
    entries: Vec<(String, LinearImage, PixelMask)>,
}

impl MemoryProvider {
    pub fn new(entries: Vec<(String, LinearImage, PixelMask)>) -> Result<Self> {
        for (id, image, mask) in &entries {
            if !mask.matches(image) {
                return Err(Error::InvalidInput(format!(
                    "record '{id}': mask dimensions do not match the image"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Wraps bare images with all-included masks and generated ids
    /// (`img_0000`, `img_0001`, ...).
    pub fn from_images(images: Vec<LinearImage>) -> Self {
        let entries = images
            .into_iter()
            .enumerate()
            .map(|(i, image)| {
                let mask = PixelMask::all_included(image.width(), image.height());
                (format!("img_{i:04}"), image, mask)
            })
            .collect();
        Self { entries }
    }
}

impl ImageProvider for MemoryProvider {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn image_id(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    fn load(&self, index: usize) -> Result<(LinearImage, PixelMask)> {
        let (_, image, mask) = &self.entries[index];
        Ok((image.clone(), mask.clone()))
    }
}
