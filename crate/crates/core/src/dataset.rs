//! Dataset ingestion: manifests, fold files, and synthetic data.
//!
//! A manifest is a CSV with header
//! `image_id,image_path,mask_path,e_R,e_G,e_B,fold`; empty cells mean
//! "absent". Relative paths are resolved against the manifest's directory,
//! so a manifest can ship next to its images. Ground-truth vectors are
//! stored exactly as given and never normalized on ingest; normalization
//! happens inside the metrics.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::IlluminantEstimate;
use crate::image::LinearImage;

pub const MANIFEST_HEADER: [&str; 7] = [
    "image_id",
    "image_path",
    "mask_path",
    "e_R",
    "e_G",
    "e_B",
    "fold",
];

/// One dataset row: an image reference plus whatever side data the source
/// provides (mask, ground truth, fold index).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub image_id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub ground_truth: Option<IlluminantEstimate>,
    pub fold: Option<usize>,
}

fn resolve(base: &Path, cell: &str) -> PathBuf {
    let p = Path::new(cell);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses and validates a manifest. Every referenced file must exist;
/// image ids must be unique; ground truth is either fully present or fully
/// absent per row.
pub fn load_manifest(path: &Path) -> Result<Vec<DatasetRecord>> {
    let base = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| manifest_error(path, 1, format!("cannot open: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| manifest_error(path, 1, format!("cannot read header: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(manifest_error(
            path,
            1,
            format!(
                "header must be '{}', got '{}'",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            manifest_error(path, line, format!("malformed row: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |reason: String| manifest_error(path, line, reason);
        if row.len() != MANIFEST_HEADER.len() {
            return Err(fail(format!(
                "expected {} fields, got {}",
                MANIFEST_HEADER.len(),
                row.len()
            )));
        }

        let image_id = row[0].trim().to_string();
        if image_id.is_empty() {
            return Err(fail("empty image_id".into()));
        }
        if !seen.insert(image_id.clone()) {
            return Err(fail(format!("duplicate image_id '{image_id}'")));
        }

        let image_path = resolve(&base, row[1].trim());
        if !image_path.is_file() {
            return Err(fail(format!(
                "image file not found: {}",
                image_path.display()
            )));
        }
        let mask_path = match row[2].trim() {
            "" => None,
            cell => {
                let p = resolve(&base, cell);
                if !p.is_file() {
                    return Err(fail(format!("mask file not found: {}", p.display())));
                }
                Some(p)
            }
        };

        let gt_cells = [row[3].trim(), row[4].trim(), row[5].trim()];
        let ground_truth = match gt_cells.iter().filter(|c| !c.is_empty()).count() {
            0 => None,
            3 => {
                let mut v = [0.0; 3];
                for (slot, cell) in v.iter_mut().zip(gt_cells) {
                    *slot = cell
                        .parse()
                        .map_err(|_| fail(format!("cannot parse ground truth value '{cell}'")))?;
                }
                Some(
                    IlluminantEstimate::new(v[0], v[1], v[2])
                        .map_err(|e| fail(format!("invalid ground truth: {e}")))?,
                )
            }
            _ => {
                return Err(fail(
                    "ground truth must have all of e_R,e_G,e_B or none".into(),
                ))
            }
        };

        let fold = match row[6].trim() {
            "" => None,
            cell => Some(
                cell.parse::<usize>()
                    .map_err(|_| fail(format!("cannot parse fold index '{cell}'")))?,
            ),
        };

        records.push(DatasetRecord {
            image_id,
            image_path,
            mask_path,
            ground_truth,
            fold,
        });
    }
    if records.is_empty() {
        return Err(manifest_error(path, 1, "manifest has no data rows".into()));
    }
    Ok(records)
}

fn manifest_error(path: &Path, line: u64, reason: String) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

/// Writes records back out in manifest format. Paths are written as stored;
/// use relative paths if the manifest should be relocatable.
pub fn write_manifest(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| csv_io_error(path, e))?;
    for r in records {
        let gt = r.ground_truth.map(|g| g.as_array());
        writer
            .write_record([
                r.image_id.clone(),
                r.image_path.display().to_string(),
                r.mask_path
                    .as_ref()
                    .map_or(String::new(), |p| p.display().to_string()),
                gt.map_or(String::new(), |g| g[0].to_string()),
                gt.map_or(String::new(), |g| g[1].to_string()),
                gt.map_or(String::new(), |g| g[2].to_string()),
                r.fold.map_or(String::new(), |f| f.to_string()),
            ])
            .map_err(|e| csv_io_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Parses a fold file (`image_id,fold` CSV with header) into id/fold pairs.
/// Partition validation against a dataset happens in the tuning layer.
pub fn load_folds(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Folds(format!("{}: cannot open: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Folds(format!("{}: {e}", path.display())))?;
    if headers.iter().collect::<Vec<_>>() != ["image_id", "fold"] {
        return Err(Error::Folds(format!(
            "{}: header must be 'image_id,fold'",
            path.display()
        )));
    }
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Folds(format!("{}: {e}", path.display())))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(Error::Folds(format!(
                "{} line {line}: expected 2 fields, got {}",
                path.display(),
                row.len()
            )));
        }
        let id = row[0].trim().to_string();
        let fold = row[1].trim().parse::<usize>().map_err(|_| {
            Error::Folds(format!(
                "{} line {line}: cannot parse fold index '{}'",
                path.display(),
                &row[1]
            ))
        })?;
        pairs.push((id, fold));
    }
    Ok(pairs)
}

/// Configuration for the synthetic Mondrian dataset generator.
///
/// Images are piecewise-constant reflectance rasters lit by one sampled
/// illuminant per image under the diagonal model: sample = reflectance x
/// illuminant x white level, plus optional Gaussian noise, clipped to the
/// white level. Patch boundaries give derivative-based methods nonzero
/// signal; the illuminant is the exact ground truth.
///
/// The illuminant sampler works in chromaticity space: r and g are drawn
/// around `illuminant_mean` with the given per-component spreads and b is
/// the complement, so `illuminant_spread.1` is directly the target standard
/// deviation of the ground-truth green chromaticity.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub image_count: usize,
    pub width: usize,
    pub height: usize,
    /// Inclusive range for the number of reflectance patches per image.
    pub patch_count: (usize, usize),
    /// Reflectance values are drawn uniformly from this subrange of [0, 1].
    pub reflectance_range: (f64, f64),
    /// Mean (r, g) chromaticity of the illuminant sampler.
    pub illuminant_mean: (f64, f64),
    /// Standard deviation of the (r, g) chromaticity perturbations.
    pub illuminant_spread: (f64, f64),
    /// Additive Gaussian noise, in intensity units.
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            image_count: 40,
            width: 64,
            height: 48,
            patch_count: (4, 12),
            reflectance_range: (0.05, 0.95),
            illuminant_mean: (0.36, 0.34),
            illuminant_spread: (0.05, 0.01),
            noise_level: 0.0,
            seed: 7,
        }
    }
}

pub const SYNTHETIC_WHITE_LEVEL: f64 = 255.0;

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidParameter(format!("synthetic spec: {why}")));
        if self.image_count == 0 || self.width == 0 || self.height == 0 {
            return bad("image count and dimensions must be at least 1".into());
        }
        if self.patch_count.0 == 0 || self.patch_count.0 > self.patch_count.1 {
            return bad(format!(
                "patch count range ({}, {}) invalid",
                self.patch_count.0, self.patch_count.1
            ));
        }
        let (rmin, rmax) = self.reflectance_range;
        if !(0.0..=1.0).contains(&rmin) || !(0.0..=1.0).contains(&rmax) || rmin > rmax {
            return bad(format!("reflectance range ({rmin}, {rmax}) outside [0, 1]"));
        }
        let (mr, mg) = self.illuminant_mean;
        if !(mr > 0.0 && mg > 0.0 && mr + mg < 1.0) {
            return bad(format!(
                "illuminant mean chromaticity ({mr}, {mg}) must be positive with r + g < 1"
            ));
        }
        let (sr, sg) = self.illuminant_spread;
        if !(sr >= 0.0 && sg >= 0.0 && sr.is_finite() && sg.is_finite()) {
            return bad(format!(
                "illuminant spread ({sr}, {sg}) must be finite and >= 0"
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad(format!(
                "noise level {} must be finite and >= 0",
                self.noise_level
            ));
        }
        Ok(())
    }
}

/// Generates the synthetic dataset. Fully deterministic for a fixed spec:
/// the same seed yields bitwise-identical images and ground truths.
pub fn synthesize_dataset(spec: &SyntheticSpec) -> Result<Vec<(LinearImage, IlluminantEstimate)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.image_count);
    for _ in 0..spec.image_count {
        let illum = sample_illuminant(spec, &mut rng)?;
        let reflectance = sample_reflectance(spec, &mut rng);
        let image = render(spec, &reflectance, &illum, &mut rng)?;
        let gt = IlluminantEstimate::new(illum[0], illum[1], illum[2])
            .expect("sampler guarantees positive components");
        out.push((image, gt));
    }
    Ok(out)
}

/// Draws an illuminant chromaticity; rejection-samples until all components
/// are usable so extreme spreads cannot produce a nonpositive channel.
fn sample_illuminant(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<[f64; 3]> {
    for _ in 0..1000 {
        let nr: f64 = rng.sample(StandardNormal);
        let ng: f64 = rng.sample(StandardNormal);
        let r = spec.illuminant_mean.0 + spec.illuminant_spread.0 * nr;
        let g = spec.illuminant_mean.1 + spec.illuminant_spread.1 * ng;
        let b = 1.0 - r - g;
        if r > 0.01 && g > 0.01 && b > 0.01 {
            return Ok([r, g, b]);
        }
    }
    Err(Error::InvalidParameter(
        "synthetic spec: illuminant spread too large for the mean chromaticity".into(),
    ))
}

/// Mondrian reflectance: a full-canvas base patch overdrawn by random
/// axis-aligned rectangles, each with its own RGB reflectance.
fn sample_reflectance(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let (w, h) = (spec.width, spec.height);
    let (rmin, rmax) = spec.reflectance_range;
    let draw = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [0; 3].map(|_| {
            if rmin == rmax {
                rmin
            } else {
                rng.random_range(rmin..=rmax)
            }
        })
    };
    let base = draw(rng);
    let mut raster = vec![base; w * h];
    let patches = rng.random_range(spec.patch_count.0..=spec.patch_count.1);
    for _ in 1..patches {
        let value = draw(rng);
        let (x0, x1) = ordered(rng.random_range(0..w), rng.random_range(0..w));
        let (y0, y1) = ordered(rng.random_range(0..h), rng.random_range(0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                raster[y * w + x] = value;
            }
        }
    }
    raster
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn render(
    spec: &SyntheticSpec,
    reflectance: &[[f64; 3]],
    illum: &[f64; 3],
    rng: &mut ChaCha8Rng,
) -> Result<LinearImage> {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for plane in &mut planes {
        plane.reserve(reflectance.len());
    }
    for refl in reflectance {
        for c in 0..3 {
            let mut v = refl[c] * illum[c] * SYNTHETIC_WHITE_LEVEL;
            if spec.noise_level > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                v += spec.noise_level * n;
            }
            planes[c].push(v.clamp(0.0, SYNTHETIC_WHITE_LEVEL));
        }
    }
    LinearImage::new(spec.width, spec.height, planes, SYNTHETIC_WHITE_LEVEL)
}
