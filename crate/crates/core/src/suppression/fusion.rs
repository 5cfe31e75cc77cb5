use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SuppressionError;
use crate::geometry::combine_iou;

use super::Detection;

/// How the ranking confidence of a detection is derived from its predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusionRule {
    ClsOnly,
    GeometricMeanClsIou,
    PurityOnly,
    IntegrityOnly,
    GeometricAvgPI,
    ArithmeticAvgPI,
    CombinedIou,
}

impl FusionRule {
    pub const ALL: [FusionRule; 7] = [
        FusionRule::ClsOnly,
        FusionRule::GeometricMeanClsIou,
        FusionRule::PurityOnly,
        FusionRule::IntegrityOnly,
        FusionRule::GeometricAvgPI,
        FusionRule::ArithmeticAvgPI,
        FusionRule::CombinedIou,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::ClsOnly => "cls-only",
            FusionRule::GeometricMeanClsIou => "geo-mean-cls-iou",
            FusionRule::PurityOnly => "purity-only",
            FusionRule::IntegrityOnly => "integrity-only",
            FusionRule::GeometricAvgPI => "geo-avg-pi",
            FusionRule::ArithmeticAvgPI => "arith-avg-pi",
            FusionRule::CombinedIou => "combined-iou",
        }
    }

    /// Whether the rule reads the purity/integrity branch outputs.
    pub fn needs_decoupled(self) -> bool {
        !matches!(self, FusionRule::ClsOnly | FusionRule::GeometricMeanClsIou)
    }

    /// Localization score the rule derives from the detection, or `None` for [`FusionRule::ClsOnly`].
    pub fn localization(self, det: &Detection) -> Result<Option<f64>, SuppressionError> {
        let need = |v: Option<f64>, field: &'static str| {
            v.ok_or(SuppressionError::MissingPrediction {
                rule: self.name(),
                field,
            })
        };
        let s = || need(det.pred_purity, "pred_purity");
        let t = || need(det.pred_integrity, "pred_integrity");
        let loc = match self {
            FusionRule::ClsOnly => return Ok(None),
            FusionRule::GeometricMeanClsIou => need(det.pred_iou, "pred_iou")?,
            FusionRule::PurityOnly => s()?,
            FusionRule::IntegrityOnly => t()?,
            FusionRule::GeometricAvgPI => (s()? * t()?).sqrt(),
            FusionRule::ArithmeticAvgPI => 0.5 * (s()? + t()?),
            FusionRule::CombinedIou => combine_iou(s()?, t()?),
        };
        Ok(Some(loc))
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = SuppressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FusionRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| SuppressionError::UnknownFusionRule(s.to_owned()))
    }
}

/// Whether a localization score is blended with the classification score or replaces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FuseMode {
    #[default]
    GeometricMean,
    Replace,
}

impl FromStr for FuseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geo-mean" => Ok(FuseMode::GeometricMean),
            "replace" => Ok(FuseMode::Replace),
            other => Err(format!("unknown fuse mode `{other}` (expected geo-mean or replace)")),
        }
    }
}

impl fmt::Display for FuseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuseMode::GeometricMean => "geo-mean",
            FuseMode::Replace => "replace",
        })
    }
}

/// Sets `confidence` to `sqrt(cls_score * localization)` for the chosen rule.
pub fn fuse_confidence(det: &Detection, rule: FusionRule) -> Result<Detection, SuppressionError> {
    fuse_confidence_with(det, rule, FuseMode::GeometricMean)
}

pub fn fuse_confidence_with(det: &Detection, rule: FusionRule, mode: FuseMode) -> Result<Detection, SuppressionError> {
    let confidence = match (rule.localization(det)?, mode) {
        (None, _) => det.cls_score,
        (Some(loc), FuseMode::GeometricMean) => (det.cls_score * loc).sqrt(),
        (Some(loc), FuseMode::Replace) => loc,
    };
    Ok(Detection {
        confidence,
        ..det.clone()
    })
}

/// Splits off detections whose classification score reaches `a`. Returns those detections and
/// their positions in the input.
pub fn gate_by_score(dets: &[Detection], a: f64) -> (Vec<Detection>, Vec<usize>) {
    dets.iter()
        .enumerate()
        .filter(|(_, d)| d.cls_score >= a)
        .map(|(i, d)| (d.clone(), i))
        .unzip()
}
