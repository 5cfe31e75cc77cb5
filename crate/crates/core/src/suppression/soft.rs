use serde::{Deserialize, Serialize};

use crate::error::SuppressionError;
use crate::geometry::iou;

use super::{rank_order, Detection, Suppressor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoftNmsMode {
    /// Scale by `1 - iou` once the overlap exceeds `nt`.
    Linear,
    /// Scale by `exp(-iou^2 / sigma)`.
    Gaussian,
}

/// Soft-NMS: overlapping detections are rescored instead of removed, and only dropped once
/// their confidence falls below `score_floor`.
#[derive(Debug, Clone, Copy)]
pub struct SoftNms {
    mode: SoftNmsMode,
    nt: f64,
    sigma: f64,
    score_floor: f64,
}

impl SoftNms {
    pub fn new(mode: SoftNmsMode, nt: f64, sigma: f64, score_floor: f64) -> Result<Self, SuppressionError> {
        if mode == SoftNmsMode::Gaussian && !(sigma > 0.0) {
            return Err(SuppressionError::NonPositiveSigma(sigma));
        }
        Ok(Self {
            mode,
            nt,
            sigma,
            score_floor,
        })
    }
}

impl Suppressor for SoftNms {
    fn name(&self) -> &str {
        match self.mode {
            SoftNmsMode::Linear => "soft-linear",
            SoftNmsMode::Gaussian => "soft-gaussian",
        }
    }

    fn suppress(&self, dets: &[Detection]) -> Vec<Detection> {
        // validated in `new`
        soft_nms(dets, self.mode, self.nt, self.sigma, self.score_floor).unwrap_or_default()
    }
}

pub fn soft_nms(
    dets: &[Detection],
    mode: SoftNmsMode,
    nt: f64,
    sigma: f64,
    score_floor: f64,
) -> Result<Vec<Detection>, SuppressionError> {
    if mode == SoftNmsMode::Gaussian && !(sigma > 0.0) {
        return Err(SuppressionError::NonPositiveSigma(sigma));
    }
    let mut work: Vec<Detection> = dets.to_vec();
    let mut alive: Vec<usize> = (0..work.len()).collect();
    let mut out = Vec::with_capacity(work.len());
    while !alive.is_empty() {
        let (pos, &best) = alive
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| rank_order(&work, a, b))
            .expect("non-empty");
        alive.swap_remove(pos);
        let picked = work[best].clone();
        alive.retain(|&j| {
            let d = &mut work[j];
            if d.class_id != picked.class_id {
                return true;
            }
            let o = iou(&picked.bbox, &d.bbox);
            let w = match mode {
                SoftNmsMode::Linear if o > nt => 1.0 - o,
                SoftNmsMode::Linear => 1.0,
                SoftNmsMode::Gaussian => (-(o * o) / sigma).exp(),
            };
            d.confidence *= w;
            d.confidence >= score_floor
        });
        out.push(picked);
    }
    Ok(out)
}
