//! Duplicate suppression and confidence fusion.
//!
//! Suppressors implement [`Suppressor`] and are looked up by name through a
//! [`SuppressorRegistry`], so experiment configs can switch between greedy NMS and the
//! Soft-NMS baselines without touching the pipeline. Suppression is always per class:
//! detections with different `class_id` never interact.

mod fusion;
mod greedy;
mod soft;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SuppressionError;
use crate::geometry::BoundingBox;

pub use fusion::{fuse_confidence, fuse_confidence_with, gate_by_score, FuseMode, FusionRule};
pub use greedy::{greedy_nms, greedy_nms_indices, GreedyNms};
pub use soft::{soft_nms, SoftNms, SoftNmsMode};

/// Default IoU threshold for greedy NMS.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class_id: u32,
    pub cls_score: f64,
    pub pred_purity: Option<f64>,
    pub pred_integrity: Option<f64>,
    pub pred_iou: Option<f64>,
    /// Ranking key used by suppression and evaluation.
    pub confidence: f64,
}

impl Detection {
    /// A detection ranked by its classification score.
    pub fn new(bbox: BoundingBox, class_id: u32, cls_score: f64) -> Self {
        Self {
            bbox,
            class_id,
            cls_score,
            pred_purity: None,
            pred_integrity: None,
            pred_iou: None,
            confidence: cls_score,
        }
    }
}

/// Ranking order used everywhere detections are sorted: confidence descending, then lower
/// class id, then earlier input position.
pub(crate) fn rank_order(dets: &[Detection], a: usize, b: usize) -> Ordering {
    dets[b]
        .confidence
        .total_cmp(&dets[a].confidence)
        .then(dets[a].class_id.cmp(&dets[b].class_id))
        .then(a.cmp(&b))
}

pub(crate) fn ranked_indices(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| rank_order(dets, a, b));
    order
}

/// A duplicate-removal strategy.
pub trait Suppressor: Send + Sync {
    fn name(&self) -> &str;

    /// Returns surviving detections ordered by final confidence, highest first.
    fn suppress(&self, dets: &[Detection]) -> Vec<Detection>;
}

/// Tunables shared by the built-in suppressors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsParams {
    pub lambda: f64,
    pub nt: f64,
    pub sigma: f64,
    pub score_floor: f64,
}

impl Default for NmsParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            nt: 0.3,
            sigma: 0.5,
            score_floor: 0.001,
        }
    }
}

pub type SuppressorFactory = fn(&NmsParams) -> Result<Box<dyn Suppressor>, SuppressionError>;

/// Name-keyed collection of suppressor constructors.
pub struct SuppressorRegistry {
    factories: BTreeMap<String, SuppressorFactory>,
}

impl SuppressorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `greedy`, `soft-linear` and `soft-gaussian`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("greedy", |p| Ok(Box::new(GreedyNms::new(p.lambda)?)));
        reg.register("soft-linear", |p| {
            Ok(Box::new(SoftNms::new(SoftNmsMode::Linear, p.nt, p.sigma, p.score_floor)?))
        });
        reg.register("soft-gaussian", |p| {
            Ok(Box::new(SoftNms::new(SoftNmsMode::Gaussian, p.nt, p.sigma, p.score_floor)?))
        });
        reg
    }

    pub fn register(&mut self, name: &str, factory: SuppressorFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &NmsParams) -> Result<Box<dyn Suppressor>, SuppressionError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| SuppressionError::UnknownSuppressor(name.to_owned()))?;
        factory(params)
    }
}

impl Default for SuppressorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
