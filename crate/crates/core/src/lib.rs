//! Decoupled IoU regression.
//!
//! IoU between a detection and its object is split into *purity* (how much of the box is
//! object) and *integrity* (how much of the object is boxed). Two small networks predict the
//! parts from features of the regressed box, the parts are recombined into IoU, and the
//! result is fused with the classification score to rank detections for NMS.
//!
//! * [`geometry`]: exact box algebra.
//! * [`suppression`]: greedy NMS, Soft-NMS and confidence fusion.
//! * [`world`]: a deterministic synthetic detection benchmark.
//! * [`regressor`]: the two-branch regressor, its losses, gradients and optimizer.
//! * [`metrics`]: AP, Pearson correlation, IoU-drift histograms and reports.
//! * [`experiment`]: config-driven generation, training, evaluation and ablations.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod kv;
pub mod metrics;
pub mod regressor;
pub mod suppression;
pub mod world;

pub use error::{Error, Result};
pub use geometry::BoundingBox;
