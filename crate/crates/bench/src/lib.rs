//! Shared fixtures for the pipeline benchmarks: deterministic synthetic
//! images at a resolution where filtering and pooling costs dominate.

use illumest::dataset::{synthesize_dataset, SyntheticSpec};
use illumest::{IlluminantEstimate, LinearImage};

pub const WIDTH: usize = 256;
pub const HEIGHT: usize = 192;

/// A fixed batch of Mondrian-style test frames with their illuminants.
pub fn frames(count: usize) -> Vec<(LinearImage, IlluminantEstimate)> {
    let spec = SyntheticSpec {
        image_count: count,
        width: WIDTH,
        height: HEIGHT,
        noise_level: 1.0,
        seed: 41,
        ..SyntheticSpec::default()
    };
    synthesize_dataset(&spec).expect("spec is valid")
}
