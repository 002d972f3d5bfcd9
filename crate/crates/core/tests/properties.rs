//! Property-based checks of the library's structural invariants.

use proptest::prelude::*;

use illumest::dataset::{load_manifest, write_manifest, DatasetRecord};
use illumest::{
    angular_error, build_grid, derivative_magnitude, estimate, gaussian_smooth, green_std, pearson,
    summarize, to_chromaticity, IlluminantEstimate, LinearImage, ParameterGrid, ParameterTuple,
    PixelMask,
};

fn arb_image() -> impl Strategy<Value = LinearImage> {
    (3usize..10, 3usize..10)
        .prop_flat_map(|(w, h)| {
            (
                Just(w),
                Just(h),
                prop::collection::vec(1.0f64..200.0, w * h * 3),
            )
        })
        .prop_map(|(w, h, v)| {
            let n = w * h;
            let planes = [v[..n].to_vec(), v[n..2 * n].to_vec(), v[2 * n..].to_vec()];
            LinearImage::new(w, h, planes, 255.0).unwrap()
        })
}

/// A small cross-section of the estimator family.
fn sample_tuples() -> Vec<ParameterTuple> {
    vec![
        ParameterTuple::gray_world(),
        ParameterTuple::white_patch(),
        ParameterTuple::shades_of_gray(4.0).unwrap(),
        ParameterTuple::general_gray_world(2.0, 1.0).unwrap(),
        ParameterTuple::gray_edge(1, 2.0, 1.0).unwrap(),
        ParameterTuple::gray_edge(2, 3.0, 1.0).unwrap(),
    ]
}

fn arb_estimates() -> impl Strategy<Value = Vec<IlluminantEstimate>> {
    prop::collection::vec((0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0), 2..20).prop_map(|v| {
        v.into_iter()
            .map(|(r, g, b)| IlluminantEstimate::new(r, g, b).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimate_is_diagonally_equivariant(
        img in arb_image(),
        gains in [0.25f64..4.0, 0.25f64..4.0, 0.25f64..4.0],
    ) {
        let mask = PixelMask::all_included(img.width(), img.height());
        let scaled = LinearImage::from_fn(img.width(), img.height(), img.white_level(), |x, y| {
            let p = img.pixel(x, y);
            [p[0] * gains[0], p[1] * gains[1], p[2] * gains[2]]
        })
        .unwrap();
        for t in sample_tuples() {
            let base = estimate(&img, &mask, t).unwrap().as_array();
            let moved = estimate(&scaled, &mask, t).unwrap().as_array();
            let expect = [base[0] * gains[0], base[1] * gains[1], base[2] * gains[2]];
            let (nm, ne) = (norm(moved), norm(expect));
            for c in 0..3 {
                prop_assert!((moved[c] / nm - expect[c] / ne).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn estimate_components_are_monotone_in_p(img in arb_image()) {
        let mask = PixelMask::all_included(img.width(), img.height());
        let ps = [1.0, 2.0, 4.0, 8.0, f64::INFINITY];
        let mut prev: Option<[f64; 3]> = None;
        for p in ps {
            let e = estimate(&img, &mask, ParameterTuple::shades_of_gray(p).unwrap())
                .unwrap()
                .as_array();
            if let Some(lo) = prev {
                for c in 0..3 {
                    prop_assert!(e[c] >= lo[c] * (1.0 - 1e-12), "p {p}: {} < {}", e[c], lo[c]);
                }
            }
            prev = Some(e);
        }
    }

    #[test]
    fn pooled_estimate_stays_within_channel_bounds(
        img in arb_image(),
        p in prop_oneof![Just(1.0), 1.0f64..12.0, Just(f64::INFINITY)],
    ) {
        let mask = PixelMask::all_included(img.width(), img.height());
        let e = estimate(&img, &mask, ParameterTuple::shades_of_gray(p).unwrap())
            .unwrap()
            .as_array();
        for (c, &pooled) in e.iter().enumerate() {
            let lo = img.plane(c).iter().copied().fold(f64::INFINITY, f64::min);
            let hi = img.plane(c).iter().copied().fold(0.0, f64::max);
            prop_assert!(pooled >= lo * (1.0 - 1e-12) && pooled <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn smoothing_preserves_channel_means(img in arb_image(), sigma in 0.4f64..3.0) {
        let out = gaussian_smooth(&img, sigma).unwrap();
        for c in 0..3 {
            let n = img.pixel_count() as f64;
            let before = img.plane(c).iter().sum::<f64>() / n;
            let after = out.plane(c).iter().sum::<f64>() / n;
            prop_assert!((before - after).abs() / before < 1e-6);
        }
    }

    #[test]
    fn derivative_magnitude_is_nonnegative(
        img in arb_image(),
        order in 1u8..3,
        sigma in prop_oneof![Just(0.0), 0.4f64..3.0],
    ) {
        let out = derivative_magnitude(&img, order, sigma).unwrap();
        for c in 0..3 {
            prop_assert!(out.plane(c).iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
    }
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn angular_error_is_symmetric_and_scale_invariant(
        a in (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0),
        b in (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0),
        k in 0.05f64..20.0,
    ) {
        let a = IlluminantEstimate::new(a.0, a.1, a.2).unwrap();
        let b = IlluminantEstimate::new(b.0, b.1, b.2).unwrap();
        let err = angular_error(&a, &b);
        prop_assert!((0.0..=180.0).contains(&err));
        prop_assert_eq!(err.to_bits(), angular_error(&b, &a).to_bits());
        prop_assert!((angular_error(&a.scaled(k), &b) - err).abs() < 1e-9);
        prop_assert!(angular_error(&a, &a.scaled(k)) < 1e-9);
    }

    #[test]
    fn summaries_shift_with_the_errors_and_ignore_order(
        errors in prop::collection::vec(0.0f64..60.0, 1..40),
        shift in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let base = summarize(&errors).unwrap();

        let shifted: Vec<f64> = errors.iter().map(|e| e + shift).collect();
        let s = summarize(&shifted).unwrap();
        let pairs = [
            (s.mean, base.mean),
            (s.median, base.median),
            (s.trimean, base.trimean),
            (s.best25, base.best25),
            (s.worst25, base.worst25),
        ];
        for (moved, orig) in pairs {
            prop_assert!((moved - (orig + shift)).abs() < 1e-9);
        }

        // Fisher-Yates with a splitmix-style generator; summaries must not
        // depend on presentation order.
        let mut shuffled = errors.clone();
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let p = summarize(&shuffled).unwrap();
        for (a, b) in p.as_array().iter().zip(base.as_array()) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_rescaling(
        raw_x in prop::collection::vec(0.0f64..10.0, 5..30),
        raw_y in prop::collection::vec(0.0f64..10.0, 5..30),
        a in 0.1f64..5.0,
        b in -10.0f64..10.0,
    ) {
        // An index ramp keeps both lists away from zero variance.
        let n = raw_x.len().min(raw_y.len());
        let xs: Vec<f64> = (0..n).map(|i| raw_x[i] + i as f64).collect();
        let ys: Vec<f64> = (0..n).map(|i| raw_y[i] + i as f64 * 0.5).collect();
        let base = pearson(&xs, &ys).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson(&moved, &ys).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn green_spread_ignores_per_estimate_magnitude(
        estimates in arb_estimates(),
        index in any::<prop::sample::Index>(),
        k in 0.05f64..20.0,
    ) {
        let base = green_std(&estimates).unwrap();
        let mut scaled = estimates.clone();
        let i = index.index(scaled.len());
        scaled[i] = scaled[i].scaled(k);
        prop_assert!((green_std(&scaled).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn chromaticity_is_scale_invariant(
        e in (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0),
        k in 0.05f64..20.0,
    ) {
        let e = IlluminantEstimate::new(e.0, e.1, e.2).unwrap();
        let c0 = to_chromaticity(&e);
        let c1 = to_chromaticity(&e.scaled(k));
        prop_assert!((c0.r - c1.r).abs() < 1e-12);
        prop_assert!((c0.g - c1.g).abs() < 1e-12);
        prop_assert!((c0.b - c1.b).abs() < 1e-12);
    }

    #[test]
    fn grid_order_is_canonical_regardless_of_input_order(
        mut ns in prop::collection::vec(0u8..3, 1..3),
        mut ps in prop::collection::vec(prop_oneof![1.0f64..12.0, Just(f64::INFINITY)], 1..4),
        mut sigmas in prop::collection::vec(0.0f64..4.0, 1..3),
    ) {
        let forward = build_grid(&ns, &ps, &sigmas).unwrap();
        ns.reverse();
        ps.reverse();
        sigmas.reverse();
        let reversed = build_grid(&ns, &ps, &sigmas).unwrap();
        prop_assert_eq!(forward.tuples(), reversed.tuples());

        let reordered: Vec<ParameterTuple> = forward.tuples().iter().rev().copied().collect();
        let rebuilt = ParameterGrid::from_tuples(reordered).unwrap();
        prop_assert_eq!(forward.tuples(), rebuilt.tuples());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn manifest_write_load_write_is_stable(
        gts in prop::collection::vec(
            (0.01f64..5.0, 0.01f64..5.0, 0.01f64..5.0, prop::option::of(0usize..4)),
            1..8,
        ),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let image_path = dir.path().join("shared.ppm");
        std::fs::write(&image_path, b"placeholder").unwrap();

        let records: Vec<DatasetRecord> = gts
            .iter()
            .enumerate()
            .map(|(i, &(r, g, b, fold))| DatasetRecord {
                image_id: format!("img{i}"),
                image_path: image_path.clone(),
                mask_path: None,
                ground_truth: Some(IlluminantEstimate::new(r, g, b).unwrap()),
                fold,
            })
            .collect();

        let first = dir.path().join("a.csv");
        write_manifest(&first, &records).unwrap();
        let loaded = load_manifest(&first).unwrap();
        prop_assert_eq!(loaded.len(), records.len());
        for (got, want) in loaded.iter().zip(&records) {
            prop_assert_eq!(&got.image_id, &want.image_id);
            prop_assert_eq!(got.fold, want.fold);
            prop_assert_eq!(
                got.ground_truth.unwrap().as_array(),
                want.ground_truth.unwrap().as_array()
            );
        }

        let second = dir.path().join("b.csv");
        write_manifest(&second, &loaded).unwrap();
        prop_assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap()
        );
    }
}
