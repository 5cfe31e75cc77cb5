use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};
use crate::regressor::DirModelParams;
use crate::world::{FeatureMode, Sample};

use super::EvalConfig;

/// Sample Pearson correlation, clamped to [-1, 1].
///
/// Single pass with running co-moments, so it stays accurate for large offsets.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::UndefinedCorrelation("sequences differ in length"));
    }
    if x.len() < 2 {
        return Err(MetricsError::UndefinedCorrelation("fewer than two points"));
    }
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (k + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(MetricsError::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Anything that assigns a localization confidence to a sample.
pub trait ConfidenceSource {
    fn label(&self) -> &str;
    fn confidence(&self, sample: &Sample) -> Result<f64>;
}

/// The simulated classification score.
pub struct ClsScore;

impl ConfidenceSource for ClsScore {
    fn label(&self) -> &str {
        "cls-score"
    }

    fn confidence(&self, sample: &Sample) -> Result<f64> {
        Ok(sample.cls_score_sim)
    }
}

/// A trained regressor reading one feature mode.
pub struct ModelConfidence<'a> {
    pub label: String,
    pub params: &'a DirModelParams,
    pub mode: FeatureMode,
}

impl ConfidenceSource for ModelConfidence<'_> {
    fn label(&self) -> &str {
        &self.label
    }

    fn confidence(&self, sample: &Sample) -> Result<f64> {
        Ok(self.params.predict_confidence(sample.features(self.mode))?.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub label: String,
    pub pearson: f64,
    pub samples: usize,
}

/// Pearson correlation between each source and the true IoU of the regressed box.
///
/// Unmatched samples are skipped; with `cfg.pearson_filter` only samples whose true IoU
/// exceeds `cfg.pearson_min_iou` take part.
pub fn correlation_study(sources: &[&dyn ConfidenceSource], samples: &[Sample], cfg: &EvalConfig) -> Result<Vec<Correlation>> {
    let pool: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.matched_gt.is_some())
        .filter(|s| !cfg.pearson_filter || s.targets.iou > cfg.pearson_min_iou)
        .collect();
    let truth: Vec<f64> = pool.iter().map(|s| s.targets.iou).collect();
    sources
        .iter()
        .map(|src| {
            let pred = pool.iter().map(|s| src.confidence(s)).collect::<Result<Vec<_>>>()?;
            Ok(Correlation {
                label: src.label().to_owned(),
                pearson: pearson(&pred, &truth)?,
                samples: pool.len(),
            })
        })
        .collect()
}
