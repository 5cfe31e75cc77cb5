//! Soft-target binary cross-entropy on purity, integrity and the recombined IoU, with exact
//! analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::combine_iou;
use crate::world::{FeatureMode, Sample, Targets};

use super::network::{DirModelParams, ForwardPass, Scratch, Variant};

/// Predictions are clamped to `[eps, 1 - eps]` before the logarithm.
pub const DEFAULT_BCE_EPS: f64 = 1e-7;

pub fn bce(pred: f64, target: f64) -> f64 {
    bce_with_eps(pred, target, DEFAULT_BCE_EPS)
}

pub fn bce_with_eps(pred: f64, target: f64, eps: f64) -> f64 {
    let q = pred.clamp(eps, 1.0 - eps);
    -(target * q.ln() + (1.0 - target) * (1.0 - q).ln())
}

/// Derivative of [`bce_with_eps`] in `pred`; zero where the clamp is active.
fn bce_grad(pred: f64, target: f64, eps: f64) -> f64 {
    if pred <= eps || pred >= 1.0 - eps {
        return 0.0;
    }
    (pred - target) / (pred * (1.0 - pred))
}

/// Batch-mean losses. For [`Variant::DirectIoU`] only `iou` is non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    pub purity: f64,
    pub integrity: f64,
    pub iou: f64,
    pub total: f64,
}

/// Loss evaluator.
#[derive(Debug, Clone, Copy)]
pub struct DirLoss {
    pub eps: f64,
}

impl Default for DirLoss {
    fn default() -> Self {
        Self { eps: DEFAULT_BCE_EPS }
    }
}

impl DirLoss {
    pub fn loss(&self, model: &DirModelParams, batch: &[Sample], mode: FeatureMode) -> Result<Losses, ModelError> {
        self.run(model, batch.iter().map(|s| (s.features(mode), s.targets)), None)
    }

    /// Losses and their gradient with respect to every parameter.
    pub fn backward(
        &self,
        model: &DirModelParams,
        batch: &[Sample],
        mode: FeatureMode,
    ) -> Result<(Losses, DirModelParams), ModelError> {
        let mut grads = model.zeros_like();
        let losses = self.run(model, batch.iter().map(|s| (s.features(mode), s.targets)), Some(&mut grads))?;
        Ok((losses, grads))
    }

    /// Same as [`DirLoss::backward`] over raw `(features, targets)` pairs.
    pub fn backward_raw<'a>(
        &self,
        model: &DirModelParams,
        items: impl IntoIterator<Item = (&'a [f64], Targets)>,
    ) -> Result<(Losses, DirModelParams), ModelError> {
        let mut grads = model.zeros_like();
        let losses = self.run(model, items, Some(&mut grads))?;
        Ok((losses, grads))
    }

    pub fn loss_raw<'a>(
        &self,
        model: &DirModelParams,
        items: impl IntoIterator<Item = (&'a [f64], Targets)>,
    ) -> Result<Losses, ModelError> {
        self.run(model, items, None)
    }

    fn run<'a>(
        &self,
        model: &DirModelParams,
        items: impl IntoIterator<Item = (&'a [f64], Targets)>,
        mut grads: Option<&mut DirModelParams>,
    ) -> Result<Losses, ModelError> {
        let eps = self.eps;
        let mut pass = ForwardPass::default();
        let mut scratch = Scratch::default();
        let mut acc = Losses::default();
        let mut n = 0usize;

        // gradients are summed per sample and scaled by 1/n at the end
        for (x, y) in items {
            model.forward_into(x, &mut pass)?;
            n += 1;
            let s = pass.s();
            let (ds, dt) = match (model.variant, pass.t()) {
                (Variant::Decoupled, Some(t)) => {
                    let c = combine_iou(s, t);
                    acc.purity += bce_with_eps(s, y.purity, eps);
                    acc.integrity += bce_with_eps(t, y.integrity, eps);
                    acc.iou += bce_with_eps(c, y.iou, eps);
                    if grads.is_none() {
                        continue;
                    }
                    let dc = bce_grad(c, y.iou, eps);
                    let denom = s + t - s * t;
                    let (dc_ds, dc_dt) = if denom > 0.0 {
                        (t * t / (denom * denom), s * s / (denom * denom))
                    } else {
                        (0.0, 0.0)
                    };
                    (
                        bce_grad(s, y.purity, eps) + dc * dc_ds,
                        bce_grad(t, y.integrity, eps) + dc * dc_dt,
                    )
                }
                _ => {
                    acc.iou += bce_with_eps(s, y.iou, eps);
                    if grads.is_none() {
                        continue;
                    }
                    (bce_grad(s, y.iou, eps), 0.0)
                }
            };
            if let Some(g) = grads.as_deref_mut() {
                model.primary.backward(x, &pass.primary, ds, &mut g.primary, &mut scratch);
                if let (Some(branch), Some(cache), Some(gb)) =
                    (&model.integrity, &pass.integrity, g.integrity.as_mut())
                {
                    branch.backward(x, cache, dt, gb, &mut scratch);
                }
            }
        }
        if n == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let inv = 1.0 / n as f64;
        acc.purity *= inv;
        acc.integrity *= inv;
        acc.iou *= inv;
        acc.total = acc.purity + acc.integrity + acc.iou;
        if let Some(g) = grads {
            g.tensors_mut().flat_map(|t| t.iter_mut()).for_each(|v| *v *= inv);
        }
        Ok(acc)
    }
}

/// Batch-mean losses with the default clamp.
pub fn dir_loss(model: &DirModelParams, batch: &[Sample], mode: FeatureMode) -> Result<Losses, ModelError> {
    DirLoss::default().loss(model, batch, mode)
}

/// Analytic gradient of the total loss with the default clamp.
pub fn backward(model: &DirModelParams, batch: &[Sample], mode: FeatureMode) -> Result<DirModelParams, ModelError> {
    DirLoss::default().backward(model, batch, mode).map(|(_, g)| g)
}
