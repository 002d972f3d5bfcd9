//! Raster decoding into [`LinearImage`].
//!
//! Supported inputs: 8/16-bit grayscale or RGB PNG, and binary PPM (P6)
//! with any maxval up to 65535 (16-bit samples are big-endian per the
//! format definition). Samples pass through in their original linear
//! scale; no gamma handling is applied.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{LinearImage, PixelMask, BLUE, GREEN, RED};

/// Decode-time options.
#[derive(Debug, Clone, Default)]
pub struct DecodeOptions {
    /// Overrides the white level inferred from the format's bit depth.
    pub white_level_override: Option<f64>,
}

/// Loads a PNG or binary PPM file as a linear image.
///
/// The white level comes from the encoding's maximum sample value (255,
/// 65535, or the PPM maxval) unless overridden in `options`. Grayscale
/// inputs are replicated across all three channels.
pub fn load_image(path: &Path, options: &DecodeOptions) -> Result<LinearImage> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = if bytes.starts_with(b"P6") {
        decode_ppm(&bytes).map_err(|reason| Error::Decode {
            path: path.to_path_buf(),
            reason,
        })?
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes).map_err(|e| match e {
            Error::Decode { reason, .. } => Error::Decode {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })?
    } else if bytes.starts_with(b"P") {
        return Err(Error::UnsupportedFormat(format!(
            "{}: only binary P6 is supported among netpbm formats",
            path.display()
        )));
    } else {
        return Err(Error::UnsupportedFormat(format!(
            "{}: unrecognized magic bytes",
            path.display()
        )));
    };

    let Decoded {
        width,
        height,
        planes,
        white_level,
    } = decoded;
    let white_level = options.white_level_override.unwrap_or(white_level);
    LinearImage::new(width, height, planes, white_level)
}

/// Loads a mask raster: a pixel is excluded iff all its channels are zero.
pub fn load_mask(path: &Path, options: &DecodeOptions) -> Result<PixelMask> {
    let image = load_image(path, options)?;
    let len = image.pixel_count();
    let (r, g, b) = (image.plane(RED), image.plane(GREEN), image.plane(BLUE));
    let included = (0..len)
        .map(|i| r[i] != 0.0 || g[i] != 0.0 || b[i] != 0.0)
        .collect();
    PixelMask::new(image.width(), image.height(), included)
}

/// Writes a 16-bit binary PPM, quantizing samples relative to the image's
/// white level. Used by the synthetic dataset generator.
pub fn write_ppm16(path: &Path, image: &LinearImage) -> Result<()> {
    let mut data = Vec::with_capacity(image.pixel_count() * 6 + 32);
    write!(data, "P6\n{} {}\n65535\n", image.width(), image.height()).expect("vec write");
    let scale = 65535.0 / image.white_level();
    for y in 0..image.height() {
        for x in 0..image.width() {
            for v in image.pixel(x, y) {
                let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
                data.extend_from_slice(&q.to_be_bytes());
            }
        }
    }
    fs::write(path, data).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Decoded {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
    white_level: f64,
}

fn decode_png(bytes: &[u8]) -> Result<Decoded> {
    use image::{DynamicImage, ImageReader};
    use std::io::Cursor;

    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let dynamic = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    if width == 0 || height == 0 {
        return Err(decode_err("zero-sized image".into()));
    }
    let len = width * height;
    let mut planes = [
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    ];
    let white_level = match &dynamic {
        DynamicImage::ImageLuma8(img) => {
            for p in img.pixels() {
                let v = p.0[0] as f64;
                planes[RED].push(v);
                planes[GREEN].push(v);
                planes[BLUE].push(v);
            }
            255.0
        }
        DynamicImage::ImageLuma16(img) => {
            for p in img.pixels() {
                let v = p.0[0] as f64;
                planes[RED].push(v);
                planes[GREEN].push(v);
                planes[BLUE].push(v);
            }
            65535.0
        }
        DynamicImage::ImageRgb8(img) => {
            for p in img.pixels() {
                planes[RED].push(p.0[0] as f64);
                planes[GREEN].push(p.0[1] as f64);
                planes[BLUE].push(p.0[2] as f64);
            }
            255.0
        }
        DynamicImage::ImageRgb16(img) => {
            for p in img.pixels() {
                planes[RED].push(p.0[0] as f64);
                planes[GREEN].push(p.0[1] as f64);
                planes[BLUE].push(p.0[2] as f64);
            }
            65535.0
        }
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {:?}; expected 8/16-bit grayscale or RGB",
                other.color()
            )));
        }
    };
    Ok(Decoded {
        width,
        height,
        planes,
        white_level,
    })
}

fn decode_ppm(bytes: &[u8]) -> std::result::Result<Decoded, String> {
    let mut pos = 2; // past "P6"
    let width = read_ppm_number(bytes, &mut pos)?;
    let height = read_ppm_number(bytes, &mut pos)?;
    let maxval = read_ppm_number(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside [1, 65535]"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }

    let len = width * height;
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let expected = len * 3 * bytes_per_sample;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(format!(
            "raster truncated: {} bytes, expected {expected}",
            data.len()
        ));
    }

    let mut planes = [
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    ];
    if bytes_per_sample == 1 {
        for i in 0..len {
            planes[RED].push(data[3 * i] as f64);
            planes[GREEN].push(data[3 * i + 1] as f64);
            planes[BLUE].push(data[3 * i + 2] as f64);
        }
    } else {
        for i in 0..len {
            for (c, plane) in planes.iter_mut().enumerate() {
                let o = 6 * i + 2 * c;
                plane.push(u16::from_be_bytes([data[o], data[o + 1]]) as f64);
            }
        }
    }
    Ok(Decoded {
        width,
        height,
        planes,
        white_level: maxval as f64,
    })
}

/// Reads the next ASCII integer, skipping whitespace and `#` comments.
fn read_ppm_number(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, String> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(b) = bytes.get(*pos) {
                    *pos += 1;
                    if *b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => return Err(format!("unexpected byte {b:#04x} in header")),
            None => return Err("truncated header".into()),
        }
    }
    let mut value: usize = 0;
    while let Some(b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or("header number overflow")?;
        *pos += 1;
    }
    Ok(value)
}

fn decode_err(reason: String) -> Error {
    Error::Decode {
        path: Default::default(),
        reason,
    }
}
