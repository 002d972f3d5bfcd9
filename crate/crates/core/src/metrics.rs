//! Accuracy measures: angular error, five-statistic summaries, green
//! chromaticity spread, and Pearson correlation.

use std::fmt;

use crate::error::{Error, Result};
use crate::estimators::IlluminantEstimate;
use crate::image::to_chromaticity;

/// Five-statistic accuracy report over a set of angular errors, plus their
/// geometric mean as a combined score.
///
/// Quartile-derived fields use linear-interpolation quantiles (midpoint
/// median); best25/worst25 average the `ceil(N / 4)` smallest and largest
/// errors. The same conventions are recorded in run metadata so reported
/// numbers are auditable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub best25: f64,
    pub worst25: f64,
    pub avg: f64,
}

impl ErrorSummary {
    /// Column heads in report order.
    pub const COLUMNS: [&'static str; 6] =
        ["mean", "median", "trimean", "best25", "worst25", "avg"];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.mean,
            self.median,
            self.trimean,
            self.best25,
            self.worst25,
            self.avg,
        ]
    }

    /// Header line aligned with the `Display` output.
    pub fn table_header() -> String {
        Self::COLUMNS.map(|c| format!("{c:>9}")).join(" ")
    }
}

impl fmt::Display for ErrorSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = self.as_array().map(|v| format!("{v:>9.4}")).join(" ");
        f.write_str(&row)
    }
}

/// One point of the stability-vs-accuracy experiment: a difference of green
/// chromaticity standard deviations paired with the difference of median
/// angular errors for the same two estimator configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferencePair {
    pub delta_sigma: f64,
    pub delta_m: f64,
}

/// Angle in degrees between two illuminant directions, in `[0, 180]`.
///
/// Symmetric, zero iff collinear, invariant to positive rescaling of either
/// argument. Both inputs are nonzero by construction, so this cannot fail.
///
/// The value is `acos` of the normalized dot product, but it is evaluated
/// as `atan2(|a x b|, a . b)`, which is the same angle without the
/// catastrophic loss of precision `acos` suffers near 0 and 180 degrees
/// (a cosine one ulp under 1 already costs ~1e-7 degrees). The cross
/// magnitude is nonnegative, so the result lands in `[0, 180]` with no
/// explicit clamping.
pub fn angular_error(est: &IlluminantEstimate, gt: &IlluminantEstimate) -> f64 {
    let a = est.as_array();
    let b = gt.as_array();
    let dot: f64 = (0..3).map(|c| a[c] * b[c]).sum();
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin: f64 = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    sin.atan2(dot).to_degrees()
}

/// Linear-interpolation quantile of an ascending slice, `q` in `[0, 1]`
/// (position `h = q * (n - 1)`, interpolated between neighbors).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Midpoint median of an ascending slice: the center element for odd
/// lengths, the average of the two central elements for even lengths.
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median of an unsorted list of angular errors.
pub fn median(errors: &[f64]) -> Result<f64> {
    let sorted = validated_sorted(errors)?;
    Ok(median_sorted(&sorted))
}

fn validated_sorted(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::Degenerate("no angular errors to summarize".into()));
    }
    if let Some(bad) = errors.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "angular errors must be finite and >= 0, got {bad}"
        )));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

/// Five-statistic summary of a non-empty list of angular errors.
pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    let sorted = validated_sorted(errors)?;
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = median_sorted(&sorted);
    let trimean =
        (quantile(&sorted, 0.25) + 2.0 * quantile(&sorted, 0.5) + quantile(&sorted, 0.75)) / 4.0;
    let quarter = n.div_ceil(4);
    let best25 = sorted[..quarter].iter().sum::<f64>() / quarter as f64;
    let worst25 = sorted[n - quarter..].iter().sum::<f64>() / quarter as f64;
    let avg = geometric_mean(&[mean, median, trimean, best25, worst25]);
    Ok(ErrorSummary {
        mean,
        median,
        trimean,
        best25,
        worst25,
        avg,
    })
}

fn geometric_mean(values: &[f64]) -> f64 {
    if values.contains(&0.0) {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Sample standard deviation (n - 1 denominator) of the estimates' green
/// chromaticities. Scale-invariant per estimate, since chromaticity
/// normalization happens first.
pub fn green_std(estimates: &[IlluminantEstimate]) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "green chromaticity spread needs at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    // Welford's online moments; the tests pin it against a two-pass oracle.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, e) in estimates.iter().enumerate() {
        let g = to_chromaticity(e).g;
        let delta = g - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (g - mean);
    }
    Ok((m2 / (estimates.len() - 1) as f64).sqrt())
}

/// Sample Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "correlation inputs differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation needs at least 2 points, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "correlation inputs must be finite, got {bad}"
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined: one of the inputs has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn e(r: f64, g: f64, b: f64) -> IlluminantEstimate {
        IlluminantEstimate::new(r, g, b).unwrap()
    }

    #[test]
    fn angular_error_axioms() {
        assert!(angular_error(&e(1.0, 1.0, 1.0), &e(2.0, 2.0, 2.0)).abs() < 1e-9);
        assert!((angular_error(&e(1.0, 0.0, 0.0), &e(0.0, 1.0, 0.0)) - 90.0).abs() < 1e-9);
        assert!((angular_error(&e(1.0, 1.0, 0.0), &e(1.0, 0.0, 0.0)) - 45.0).abs() < 1e-9);
    }

    #[test]
    fn angular_error_is_symmetric_and_scale_invariant() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let a = e(
                rng.random_range(0.01..4.0),
                rng.random_range(0.01..4.0),
                rng.random_range(0.01..4.0),
            );
            let b = e(
                rng.random_range(0.01..4.0),
                rng.random_range(0.01..4.0),
                rng.random_range(0.01..4.0),
            );
            let fwd = angular_error(&a, &b);
            assert!((fwd - angular_error(&b, &a)).abs() < 1e-9);
            let k = rng.random_range(0.1..100.0);
            assert!((fwd - angular_error(&a.scaled(k), &b)).abs() < 1e-9);
            assert!((0.0..=180.0).contains(&fwd));
        }
    }

    #[test]
    fn summarize_constant_sample() {
        let s = summarize(&[2.0, 2.0, 2.0, 2.0]).unwrap();
        for v in s.as_array() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn summarize_small_hand_case() {
        let s = summarize(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!((s.median - 2.5).abs() < 1e-12);
        assert!((s.best25 - 1.0).abs() < 1e-12);
        assert!((s.worst25 - 4.0).abs() < 1e-12);
        // Quartiles interpolate at positions 0.75 and 2.25 of [1, 2, 3, 4].
        assert!((s.trimean - (1.75 + 2.0 * 2.5 + 3.25) / 4.0).abs() < 1e-12);
        let g = (s.mean * s.median * s.trimean * s.best25 * s.worst25).powf(0.2);
        assert!((s.avg - g).abs() < 1e-12);
    }

    /// Reference statistics coded independently of the library versions:
    /// quantiles via explicit index arithmetic, means via slice sums.
    fn reference_summary(errors: &[f64]) -> ErrorSummary {
        let mut v = errors.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        let q = |frac: f64| -> f64 {
            let pos = frac * (n - 1) as f64;
            let i = pos as usize;
            let w = pos - i as f64;
            if i + 1 < n {
                v[i] * (1.0 - w) + v[i + 1] * w
            } else {
                v[i]
            }
        };
        let mean = v.iter().sum::<f64>() / n as f64;
        let median = if n.is_multiple_of(2) {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        } else {
            v[n / 2]
        };
        let trimean = (q(0.25) + 2.0 * q(0.5) + q(0.75)) / 4.0;
        let k = n / 4 + usize::from(!n.is_multiple_of(4));
        let best25 = v[..k].iter().sum::<f64>() / k as f64;
        let worst25 = v[n - k..].iter().sum::<f64>() / k as f64;
        let avg = (mean.ln() + median.ln() + trimean.ln() + best25.ln() + worst25.ln()) / 5.0;
        ErrorSummary {
            mean,
            median,
            trimean,
            best25,
            worst25,
            avg: avg.exp(),
        }
    }

    #[test]
    fn summarize_matches_independent_reference_on_frozen_sample() {
        let mut rng = StdRng::seed_from_u64(1000);
        for n in [5, 99, 100, 1000] {
            let errors: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..40.0)).collect();
            let got = summarize(&errors).unwrap();
            let want = reference_summary(&errors);
            for (g, w) in got.as_array().iter().zip(want.as_array()) {
                assert!((g - w).abs() < 1e-9, "n = {n}: {got:?} vs {want:?}");
            }
            assert!(got.best25 <= got.median && got.median <= got.worst25);
            assert!(got.mean >= got.best25 && got.mean <= got.worst25);
            assert!(got.trimean >= got.best25 && got.trimean <= got.worst25);
        }
    }

    #[test]
    fn summarize_shift_monotonicity() {
        let mut rng = StdRng::seed_from_u64(2000);
        let errors: Vec<f64> = (0..37).map(|_| rng.random_range(0.0..20.0)).collect();
        let base = summarize(&errors).unwrap();
        let c = 3.25;
        let shifted: Vec<f64> = errors.iter().map(|v| v + c).collect();
        let moved = summarize(&shifted).unwrap();
        // Every order statistic moves by exactly c; avg does not.
        assert!((moved.mean - base.mean - c).abs() < 1e-9);
        assert!((moved.median - base.median - c).abs() < 1e-9);
        assert!((moved.trimean - base.trimean - c).abs() < 1e-9);
        assert!((moved.best25 - base.best25 - c).abs() < 1e-9);
        assert!((moved.worst25 - base.worst25 - c).abs() < 1e-9);
    }

    #[test]
    fn summarize_rejects_bad_input() {
        assert!(matches!(summarize(&[]), Err(Error::Degenerate(_))));
        assert!(matches!(
            summarize(&[1.0, -0.5]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            summarize(&[f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn green_std_zero_for_identical_estimates() {
        let estimates = vec![e(0.4, 0.5, 0.1); 8];
        assert_eq!(green_std(&estimates).unwrap(), 0.0);
    }

    #[test]
    fn green_std_matches_two_pass_oracle() {
        let mut rng = StdRng::seed_from_u64(3000);
        let estimates: Vec<IlluminantEstimate> = (0..100)
            .map(|_| {
                e(
                    rng.random_range(0.1..2.0),
                    rng.random_range(0.1..2.0),
                    rng.random_range(0.1..2.0),
                )
            })
            .collect();
        let got = green_std(&estimates).unwrap();

        let gs: Vec<f64> = estimates.iter().map(|e| to_chromaticity(e).g).collect();
        let mean = gs.iter().sum::<f64>() / gs.len() as f64;
        let var = gs.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (gs.len() - 1) as f64;
        assert!((got - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn green_std_is_scale_invariant_per_estimate() {
        let estimates = vec![e(0.5, 0.8, 0.2), e(0.3, 0.3, 0.3), e(1.0, 0.2, 0.9)];
        let scaled: Vec<IlluminantEstimate> = estimates
            .iter()
            .enumerate()
            .map(|(i, v)| v.scaled(1.0 + i as f64 * 10.0))
            .collect();
        assert!((green_std(&estimates).unwrap() - green_std(&scaled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn green_std_needs_two_estimates() {
        assert!(green_std(&[e(1.0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn pearson_linear_cases() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.3 - 2.0).collect();
        let up: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let down: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant() {
        let mut rng = StdRng::seed_from_u64(4000);
        let xs: Vec<f64> = (0..60).map(|_| rng.random_range(-4.0..9.0)).collect();
        let ys: Vec<f64> = (0..60).map(|_| rng.random_range(-4.0..9.0)).collect();
        let base = pearson(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| 3.5 * x - 11.0).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| 0.04 * y + 2.0).collect();
        assert!((pearson(&xs2, &ys2).unwrap() - base).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn pearson_error_paths() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn summary_table_is_aligned() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        let header = ErrorSummary::table_header();
        let row = s.to_string();
        assert_eq!(header.len(), row.len());
        assert!(header.contains("median") && header.contains("worst25"));
    }
}
