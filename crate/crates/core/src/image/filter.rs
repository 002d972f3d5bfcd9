//! Gaussian smoothing and derivative-magnitude filtering.
//!
//! All filtering is separable cross-correlation with reflect padding
//! (edge sample repeated: `d c b a | a b c d | d c b a`). That padding
//! conserves total mass under any symmetric normalized kernel, so
//! smoothing preserves the per-channel mean.
//!
//! Kernels are truncated at `ceil(3 * sigma)` taps each side. The
//! smoothing kernel is renormalized to unit sum. Derivative kernels are
//! stored as half-kernels and applied in difference form, which is
//! bitwise zero on constant input, and they are scaled so that a unit
//! ramp (order one) and `x^2 / 2` (order two) respond with exactly one.
//! `sigma = 0` degenerates to the identity and to central finite
//! differences, so unsmoothed methods are exact special cases of the
//! smoothed ones.

use crate::error::{Error, Result};
use crate::image::LinearImage;

/// A separable 1-D correlation kernel.
pub(crate) enum Kernel1d {
    /// Full taps over `[-r, r]`, applied as a plain weighted sum.
    Symmetric(Vec<f64>),
    /// Half taps `h[t - 1]` for offsets `t = 1..=r`, applied as
    /// `sum h_t * (p[x + t] - p[x - t])`. The implied full kernel is odd
    /// with a zero center tap.
    Antisymmetric(Vec<f64>),
    /// Half taps `h[t - 1]` for `t = 1..=r`, applied as
    /// `sum h_t * ((p[x - t] - p[x]) + (p[x + t] - p[x]))`. The implied
    /// full kernel is even with center `-2 * sum(h)`, hence zero-mean.
    SecondDiff(Vec<f64>),
}

impl Kernel1d {
    fn radius(&self) -> usize {
        match self {
            Kernel1d::Symmetric(k) => k.len() / 2,
            Kernel1d::Antisymmetric(h) | Kernel1d::SecondDiff(h) => h.len(),
        }
    }

    /// Response at `center`, an index into a buffer padded with at least
    /// `radius` valid samples on each side.
    fn apply(&self, padded: &[f64], center: usize) -> f64 {
        match self {
            Kernel1d::Symmetric(k) => {
                let start = center - k.len() / 2;
                k.iter()
                    .enumerate()
                    .map(|(j, &v)| v * padded[start + j])
                    .sum()
            }
            Kernel1d::Antisymmetric(h) => h
                .iter()
                .enumerate()
                .map(|(j, &v)| v * (padded[center + j + 1] - padded[center - j - 1]))
                .sum(),
            Kernel1d::SecondDiff(h) => {
                let c = padded[center];
                h.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        v * ((padded[center - j - 1] - c) + (padded[center + j + 1] - c))
                    })
                    .sum()
            }
        }
    }

    /// Equivalent full taps over `[-r, r]`, for oracle evaluation.
    #[cfg(test)]
    fn full_taps(&self) -> Vec<f64> {
        match self {
            Kernel1d::Symmetric(k) => k.clone(),
            Kernel1d::Antisymmetric(h) => {
                let mut full: Vec<f64> = h.iter().rev().map(|&v| -v).collect();
                full.push(0.0);
                full.extend(h.iter().copied());
                full
            }
            Kernel1d::SecondDiff(h) => {
                let mut full: Vec<f64> = h.iter().rev().copied().collect();
                full.push(-2.0 * h.iter().sum::<f64>());
                full.extend(h.iter().copied());
                full
            }
        }
    }
}

/// Reflects an out-of-range index back into `[0, n)`, repeating the edge
/// sample (half-sample symmetry).
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 1-D cross-correlation along rows.
fn correlate_rows(src: &[f64], width: usize, height: usize, kernel: &Kernel1d) -> Vec<f64> {
    let radius = kernel.radius();
    let mut out = vec![0.0; src.len()];
    let mut padded = vec![0.0; width + 2 * radius];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for (j, slot) in padded.iter_mut().enumerate() {
            *slot = row[reflect(j as isize - radius as isize, width)];
        }
        let out_row = &mut out[y * width..(y + 1) * width];
        for (x, slot) in out_row.iter_mut().enumerate() {
            *slot = kernel.apply(&padded, x + radius);
        }
    }
    out
}

/// 1-D cross-correlation along columns.
fn correlate_cols(src: &[f64], width: usize, height: usize, kernel: &Kernel1d) -> Vec<f64> {
    let radius = kernel.radius();
    let mut out = vec![0.0; src.len()];
    let mut padded = vec![0.0; height + 2 * radius];
    for x in 0..width {
        for (j, slot) in padded.iter_mut().enumerate() {
            *slot = src[reflect(j as isize - radius as isize, height) * width + x];
        }
        for y in 0..height {
            out[y * width + x] = kernel.apply(&padded, y + radius);
        }
    }
    out
}

fn separable(
    src: &[f64],
    width: usize,
    height: usize,
    row_k: &Kernel1d,
    col_k: &Kernel1d,
) -> Vec<f64> {
    correlate_cols(
        &correlate_rows(src, width, height, row_k),
        width,
        height,
        col_k,
    )
}

fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Gaussian taps over `[-r, r]`, normalized to unit sum.
pub(crate) fn gaussian_kernel(sigma: f64) -> Kernel1d {
    if sigma == 0.0 {
        return Kernel1d::Symmetric(vec![1.0]);
    }
    let r = kernel_radius(sigma) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|t| (-(t as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Kernel1d::Symmetric(k)
}

/// First-derivative-of-Gaussian half-kernel, scaled so a unit ramp
/// responds with exactly one. `sigma = 0` gives the central difference
/// `[-1/2, 0, 1/2]`.
pub(crate) fn gaussian_deriv1_kernel(sigma: f64) -> Kernel1d {
    if sigma == 0.0 {
        return Kernel1d::Antisymmetric(vec![0.5]);
    }
    let r = kernel_radius(sigma);
    let mut h: Vec<f64> = (1..=r)
        .map(|t| {
            let t = t as f64;
            (t / (sigma * sigma)) * (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // Correlation response to f(x) = x is sum(2 t h_t); pin it to 1.
    let ramp: f64 = h
        .iter()
        .enumerate()
        .map(|(j, &v)| 2.0 * (j + 1) as f64 * v)
        .sum();
    for v in &mut h {
        *v /= ramp;
    }
    Kernel1d::Antisymmetric(h)
}

/// Second-derivative-of-Gaussian half-kernel, scaled so the response to
/// `x^2 / 2` is exactly one. `sigma = 0` gives `[1, -2, 1]`.
pub(crate) fn gaussian_deriv2_kernel(sigma: f64) -> Kernel1d {
    if sigma == 0.0 {
        return Kernel1d::SecondDiff(vec![1.0]);
    }
    let r = kernel_radius(sigma);
    let s2 = sigma * sigma;
    let mut h: Vec<f64> = (1..=r)
        .map(|t| {
            let t = t as f64;
            (t * t / (s2 * s2) - 1.0 / s2) * (-t * t / (2.0 * s2)).exp()
        })
        .collect();
    // Response to f(x) = x^2 / 2 is sum(t^2 h_t); pin it to 1. Zero mean
    // is structural in the second-difference form.
    let curve: f64 = h
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let t = (j + 1) as f64;
            t * t * v
        })
        .sum();
    for v in &mut h {
        *v /= curve;
    }
    Kernel1d::SecondDiff(h)
}

/// Separable Gaussian smoothing of every channel. `sigma = 0` returns the
/// input unchanged.
pub fn gaussian_smooth(image: &LinearImage, sigma: f64) -> Result<LinearImage> {
    validate_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let k = gaussian_kernel(sigma);
    let (w, h) = (image.width(), image.height());
    let planes = [
        separable(image.plane(0), w, h, &k, &k),
        separable(image.plane(1), w, h, &k, &k),
        separable(image.plane(2), w, h, &k, &k),
    ];
    LinearImage::new(w, h, planes, image.white_level())
}

/// Per-channel local derivative magnitude.
///
/// Order 1 is `sqrt(fx^2 + fy^2)`; order 2 is
/// `sqrt(fxx^2 + 4 fxy^2 + fyy^2)`. Derivatives come from
/// Gaussian-derivative filters at the given sigma, or central finite
/// differences when `sigma = 0`. Output samples are always >= 0, and a
/// constant image maps to exactly zero everywhere.
pub fn derivative_magnitude(image: &LinearImage, order: u8, sigma: f64) -> Result<LinearImage> {
    validate_sigma(sigma)?;
    if order != 1 && order != 2 {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let smooth = gaussian_kernel(sigma);
    let d1 = gaussian_deriv1_kernel(sigma);
    let (w, h) = (image.width(), image.height());

    let mut planes: [Vec<f64>; 3] = Default::default();
    for (c, plane) in planes.iter_mut().enumerate() {
        let src = image.plane(c);
        *plane = if order == 1 {
            let fx = separable(src, w, h, &d1, &smooth);
            let fy = separable(src, w, h, &smooth, &d1);
            fx.iter()
                .zip(&fy)
                .map(|(&x, &y)| (x * x + y * y).sqrt())
                .collect()
        } else {
            let d2 = gaussian_deriv2_kernel(sigma);
            let fxx = separable(src, w, h, &d2, &smooth);
            let fyy = separable(src, w, h, &smooth, &d2);
            let fxy = separable(src, w, h, &d1, &d1);
            fxx.iter()
                .zip(&fyy)
                .zip(&fxy)
                .map(|((&xx, &yy), &xy)| (xx * xx + 4.0 * xy * xy + yy * yy).sqrt())
                .collect()
        };
    }
    LinearImage::new(w, h, planes, image.white_level())
}

fn validate_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_image(seed: u64, w: usize, h: usize) -> LinearImage {
        let mut rng = StdRng::seed_from_u64(seed);
        LinearImage::from_fn(w, h, 255.0, |_, _| {
            [
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
            ]
        })
        .unwrap()
    }

    /// Direct (non-separable) 2-D cross-correlation with reflect padding,
    /// used as the oracle for the separable implementation.
    fn direct_2d(src: &LinearImage, c: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
        let (w, h) = (src.width(), src.height());
        let (rx, ry) = (kx.len() / 2, ky.len() / 2);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kyv) in ky.iter().enumerate() {
                    for (i, &kxv) in kx.iter().enumerate() {
                        let sx = reflect(x as isize + i as isize - rx as isize, w);
                        let sy = reflect(y as isize + j as isize - ry as isize, h);
                        acc += kyv * kxv * src.sample(c, sx, sy);
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    #[test]
    fn sigma_zero_is_identity() {
        let img = random_image(1, 7, 5);
        let out = gaussian_smooth(&img, 0.0).unwrap();
        assert_eq!(img, out);
    }

    #[test]
    fn constant_image_is_fixed_point_of_smoothing() {
        let img = LinearImage::constant(12, 9, [3.0, 7.0, 11.0], 255.0).unwrap();
        for sigma in [0.5, 1.0, 2.5, 6.0] {
            let out = gaussian_smooth(&img, sigma).unwrap();
            for c in 0..3 {
                let want = img.sample(c, 0, 0);
                for &v in out.plane(c) {
                    assert!((v - want).abs() / want < 1e-9, "sigma {sigma}");
                }
            }
        }
    }

    #[test]
    fn impulse_response_matches_direct_kernel_evaluation() {
        let img = LinearImage::from_fn(9, 9, 255.0, |x, y| {
            if (x, y) == (4, 4) {
                [1.0, 1.0, 1.0]
            } else {
                [0.0; 3]
            }
        })
        .unwrap();
        let out = gaussian_smooth(&img, 1.0).unwrap();

        // Normalized 2-D kernel evaluated directly; the separable pass must
        // reproduce it around the impulse.
        let r = 3i64;
        let mut k2 = vec![0.0; 49];
        let mut sum = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let v = (-(dx * dx + dy * dy) as f64 / 2.0).exp();
                k2[((dy + r) * 7 + (dx + r)) as usize] = v;
                sum += v;
            }
        }
        for v in &mut k2 {
            *v /= sum;
        }
        for y in 0..9i64 {
            for x in 0..9i64 {
                let want = if (x - 4).abs() <= 3 && (y - 4).abs() <= 3 {
                    k2[((y - 4 + r) * 7 + (x - 4 + r)) as usize]
                } else {
                    0.0
                };
                let got = out.sample(0, x as usize, y as usize);
                assert!((got - want).abs() < 1e-6, "({x}, {y}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn smoothing_preserves_channel_means() {
        let img = random_image(2, 23, 17);
        for sigma in [0.7, 1.0, 3.0, 9.0] {
            let out = gaussian_smooth(&img, sigma).unwrap();
            for c in 0..3 {
                let before: f64 = img.plane(c).iter().sum::<f64>() / img.pixel_count() as f64;
                let after: f64 = out.plane(c).iter().sum::<f64>() / out.pixel_count() as f64;
                assert!(
                    (before - after).abs() / before < 1e-6,
                    "sigma {sigma} channel {c}: {before} vs {after}"
                );
            }
        }
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let img = LinearImage::constant(10, 10, [5.0, 5.0, 5.0], 255.0).unwrap();
        for order in [1, 2] {
            for sigma in [0.0, 1.0, 2.0] {
                let out = derivative_magnitude(&img, order, sigma).unwrap();
                for c in 0..3 {
                    assert!(
                        out.plane(c).iter().all(|&v| v == 0.0),
                        "order {order} sigma {sigma}"
                    );
                }
            }
        }
    }

    #[test]
    fn unit_ramp_has_unit_gradient_in_the_interior() {
        let img = LinearImage::from_fn(16, 16, 255.0, |x, _| [x as f64; 3]).unwrap();
        let out = derivative_magnitude(&img, 1, 0.0).unwrap();
        for y in 1..15 {
            for x in 1..15 {
                assert!((out.sample(0, x, y) - 1.0).abs() < 1e-12, "({x}, {y})");
            }
        }
    }

    #[test]
    fn gaussian_derivative_kernels_also_respond_unit_to_polynomials() {
        // Interior response of the sigma > 0 kernels to a ramp and to a
        // parabola fixes their discrete normalization.
        let ramp = LinearImage::from_fn(40, 9, 1e6, |x, _| [x as f64; 3]).unwrap();
        let out = derivative_magnitude(&ramp, 1, 2.0).unwrap();
        assert!((out.sample(0, 20, 4) - 1.0).abs() < 1e-9);

        let parabola =
            LinearImage::from_fn(40, 9, 1e6, |x, _| [0.5 * (x as f64).powi(2); 3]).unwrap();
        let out = derivative_magnitude(&parabola, 2, 2.0).unwrap();
        assert!((out.sample(0, 20, 4) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separable_matches_explicit_kernel_convolution() {
        let img = random_image(3, 16, 16);
        let smooth = gaussian_kernel(1.0).full_taps();
        let d1 = gaussian_deriv1_kernel(1.0).full_taps();

        let out = derivative_magnitude(&img, 1, 1.0).unwrap();
        for c in 0..3 {
            let fx = direct_2d(&img, c, &d1, &smooth);
            let fy = direct_2d(&img, c, &smooth, &d1);
            for (i, &got) in out.plane(c).iter().enumerate() {
                let want = (fx[i] * fx[i] + fy[i] * fy[i]).sqrt();
                assert!((got - want).abs() < 1e-6, "channel {c} index {i}");
            }
        }

        let d2 = gaussian_deriv2_kernel(1.0).full_taps();
        let out = derivative_magnitude(&img, 2, 1.0).unwrap();
        for c in 0..3 {
            let fxx = direct_2d(&img, c, &d2, &smooth);
            let fyy = direct_2d(&img, c, &smooth, &d2);
            let fxy = direct_2d(&img, c, &d1, &d1);
            for (i, &got) in out.plane(c).iter().enumerate() {
                let want = (fxx[i] * fxx[i] + 4.0 * fxy[i] * fxy[i] + fyy[i] * fyy[i]).sqrt();
                assert!((got - want).abs() < 1e-6, "channel {c} index {i}");
            }
        }
    }

    #[test]
    fn expanded_half_kernels_have_the_advertised_structure() {
        let d1 = gaussian_deriv1_kernel(0.0).full_taps();
        assert_eq!(d1, vec![-0.5, 0.0, 0.5]);
        let d2 = gaussian_deriv2_kernel(0.0).full_taps();
        assert_eq!(d2, vec![1.0, -2.0, 1.0]);

        // sigma > 0: odd symmetry with zero center, and zero total mass.
        let d1 = gaussian_deriv1_kernel(1.5).full_taps();
        let r = d1.len() / 2;
        assert_eq!(d1[r], 0.0);
        for t in 1..=r {
            assert_eq!(d1[r + t], -d1[r - t]);
        }
        let d2 = gaussian_deriv2_kernel(1.5).full_taps();
        let r = d2.len() / 2;
        for t in 1..=r {
            assert_eq!(d2[r + t], d2[r - t]);
        }
        assert!(d2.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn large_sigma_on_tiny_image_stays_finite() {
        let img = random_image(4, 3, 2);
        let out = gaussian_smooth(&img, 9.0).unwrap();
        for c in 0..3 {
            assert!(out.plane(c).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let img = random_image(5, 4, 4);
        assert!(gaussian_smooth(&img, -1.0).is_err());
        assert!(derivative_magnitude(&img, 0, 1.0).is_err());
        assert!(derivative_magnitude(&img, 3, 1.0).is_err());
        assert!(derivative_magnitude(&img, 1, f64::NAN).is_err());
    }
}
