//! Deterministic synthetic detection world.
//!
//! Scenes hold ground-truth objects on a square canvas. For each object a set of jittered
//! proposals is drawn, each proposal is pushed toward its object by a simulated box regressor
//! whose gain grows with the training epoch, and occupancy features are read off both the
//! proposal (foresight) and the regressed box (hindsight).

mod config;
mod dataset;
mod features;
pub mod format;
mod scene;

pub use config::WorldConfig;
pub use dataset::{build_dataset, build_samples, select_positives, targets_for, FeatureMode, Sample, Targets};
pub use features::extract_features;
pub use scene::{generate_scenes, jitter_proposal, simulate_regression, Scene, SceneObject};
