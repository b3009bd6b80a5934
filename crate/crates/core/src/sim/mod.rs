//! Synthetic occluded-scene event simulation.

pub mod config;
pub mod occluder;
pub mod scene;
pub mod simulate;
pub mod texture;

use std::path::Path;

pub use occluder::{
    make_cardboard_occluder, make_fence_occluder, make_stripe_occluder, OccluderPattern, OccluderSpec,
    Orientation,
};
pub use scene::{render_view, Intrinsics, SceneSpec, INTENSITY_FLOOR};
pub use simulate::{simulate_events, Trajectory};

use crate::dataset::{save_sample, DatasetSample};
use crate::error::Result;

/// Writes a simulated sample in the dataset directory layout.
pub fn export_sample(sample: &DatasetSample, dir: &Path) -> Result<()> {
    save_sample(sample, dir)
}
