//! Statistics-based illumination estimation and its evaluation harness.
//!
//! The estimator family (gray-world, white-patch, shades-of-gray, general
//! gray-world, gray-edge) is a single engine over parameter tuples
//! `(n, p, sigma)`: derivative order, Minkowski norm, and smoothing scale.
//! Around it sit angular-error metrics, grid search with supervised and
//! cross-validated tuning, an unsupervised tuner that minimizes the spread
//! of the estimates' green chromaticity, and dataset plumbing (manifests,
//! folds, a synthetic generator, report bundles).
//!
//! Everything is deterministic: fixed inputs produce bitwise-identical
//! results regardless of the rayon worker count.

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod image;
pub mod metrics;
pub mod provider;
pub mod report;
pub mod tuning;

pub use error::{Error, Result};
pub use estimators::{estimate, estimate_named, IlluminantEstimate, Method, ParameterTuple};
pub use image::{
    decode::{load_image, load_mask, write_ppm16, DecodeOptions},
    effective_mask,
    filter::{derivative_magnitude, gaussian_smooth},
    to_chromaticity, Chromaticity, LinearImage, PixelMask,
};
pub use metrics::{
    angular_error, green_std, median, pearson, summarize, DifferencePair, ErrorSummary,
};
pub use provider::{DiskProvider, ImageProvider, LoadOptions, MemoryProvider};
pub use tuning::{
    build_grid, compute_estimates, correlation_experiment, cross_validate,
    cross_validate_evaluated, default_grid, default_method_grids, default_n_values,
    default_p_values, default_sigma_values, evaluate_grid, tune_green_stability, tune_supervised,
    CorrelationOutcome, CrossValResult, EvaluatedGrid, FoldAssignment, FoldChoice, GridEstimates,
    MethodPairs, ParameterGrid, TuningResult,
};
