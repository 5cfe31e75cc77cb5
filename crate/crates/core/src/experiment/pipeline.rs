use crate::error::{ModelError, Result};
use crate::metrics::{ap_summary, ApSummary, EvalConfig, SceneEval};
use crate::regressor::{DirModelParams, Variant};
use crate::suppression::{fuse_confidence_with, gate_by_score, Detection, FuseMode, FusionRule, Suppressor};
use crate::world::{build_samples, generate_scenes, FeatureMode, Sample, Scene, WorldConfig};

use super::ExperimentConfig;

/// Held-out scenes and their samples at the evaluation epoch.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub scenes: Vec<Scene>,
    pub samples: Vec<Sample>,
}

impl EvalSplit {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let world = cfg.eval_world();
        Self::build_from(&world, cfg.eval_epoch())
    }

    pub fn build_from(world: &WorldConfig, epoch: usize) -> Result<Self> {
        let scenes = generate_scenes(world)?;
        let samples = build_samples(world, &scenes, epoch)?;
        Ok(Self { scenes, samples })
    }
}

/// Every sample becomes a detection of its regressed box, carrying the model's predictions
/// when a model is given. Confidence starts at the classification score.
pub fn raw_detections(split: &EvalSplit, model: Option<(&DirModelParams, FeatureMode)>) -> Result<Vec<SceneEval>> {
    if let Some((m, mode)) = model {
        if let Some(s) = split.samples.first() {
            let actual = s.features(mode).len();
            if actual != m.input_dim {
                return Err(ModelError::DimensionMismatch {
                    expected: m.input_dim,
                    actual,
                }
                .into());
            }
        }
    }
    let mut out: Vec<SceneEval> = split
        .scenes
        .iter()
        .map(|s| SceneEval {
            detections: Vec::new(),
            ground_truth: s.objects.clone(),
        })
        .collect();
    let first_id = split.scenes.first().map_or(0, |s| s.scene_id);
    for s in &split.samples {
        let mut det = Detection::new(s.regressed, s.class_id, s.cls_score_sim);
        if let Some((m, mode)) = model {
            let p = m.predict_confidence(s.features(mode))?;
            det.pred_iou = Some(p.c);
            if m.variant == Variant::Decoupled {
                det.pred_purity = Some(p.s);
                det.pred_integrity = p.t;
            }
        }
        out[(s.scene_id - first_id) as usize].detections.push(det);
    }
    Ok(out)
}

/// Gate, fuse and suppress each scene.
///
/// Detections below the gate keep their classification score as confidence.
pub fn infer(
    raw: &[SceneEval],
    rule: FusionRule,
    mode: FuseMode,
    gate: f64,
    suppressor: &dyn Suppressor,
) -> Result<Vec<SceneEval>> {
    raw.iter()
        .map(|scene| {
            let (passed, idx) = gate_by_score(&scene.detections, gate);
            let mut dets = scene.detections.clone();
            for (d, i) in passed.iter().zip(idx) {
                dets[i] = fuse_confidence_with(d, rule, mode)?;
            }
            Ok(SceneEval {
                detections: suppressor.suppress(&dets),
                ground_truth: scene.ground_truth.clone(),
            })
        })
        .collect()
}

/// AP of one (model, feature mode, rule) combination on a split.
pub fn score(
    raw: &[SceneEval],
    rule: FusionRule,
    cfg: &ExperimentConfig,
    suppressor: &dyn Suppressor,
    eval: &EvalConfig,
) -> Result<ApSummary> {
    let kept = infer(raw, rule, cfg.fuse_mode, cfg.gate, suppressor)?;
    ap_summary(&kept, eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suppression::{NmsParams, SuppressorRegistry};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.world.num_scenes = 5;
        cfg.eval_num_scenes = 6;
        cfg
    }

    #[test]
    fn detections_are_grouped_by_scene() {
        let cfg = small();
        let split = EvalSplit::build(&cfg).unwrap();
        assert_eq!(split.scenes[0].scene_id, cfg.eval_scene_offset);
        let raw = raw_detections(&split, None).unwrap();
        assert_eq!(raw.len(), 6);
        let per_object = cfg.world.proposals_per_object;
        for (scene, r) in split.scenes.iter().zip(&raw) {
            assert_eq!(r.detections.len(), scene.objects.len() * per_object);
            assert_eq!(r.ground_truth, scene.objects);
            assert!(r.detections.iter().all(|d| d.pred_iou.is_none() && d.confidence == d.cls_score));
        }
    }

    #[test]
    fn model_predictions_are_attached() {
        let cfg = small();
        let split = EvalSplit::build(&cfg).unwrap();
        let m = DirModelParams::init(cfg.world.feature_dim(), 4, 4, Variant::Decoupled, 1);
        let raw = raw_detections(&split, Some((&m, FeatureMode::Hindsight))).unwrap();
        let d = &raw[0].detections[0];
        let s = &split.samples[0];
        let p = m.predict_confidence(&s.features_hindsight).unwrap();
        assert_eq!(d.pred_purity, Some(p.s));
        assert_eq!(d.pred_integrity, p.t);
        assert_eq!(d.pred_iou, Some(p.c));

        let direct = DirModelParams::init(cfg.world.feature_dim(), 4, 4, Variant::DirectIoU, 1);
        let raw = raw_detections(&split, Some((&direct, FeatureMode::Foresight))).unwrap();
        assert!(raw[0].detections[0].pred_purity.is_none());
        // decoupled rules cannot run on a direct model
        let nms = SuppressorRegistry::with_builtins().build("greedy", &NmsParams::default()).unwrap();
        assert!(score(&raw, FusionRule::CombinedIou, &cfg, nms.as_ref(), &cfg.eval).is_err());
        assert!(score(&raw, FusionRule::GeometricMeanClsIou, &cfg, nms.as_ref(), &cfg.eval).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = small();
        let split = EvalSplit::build(&cfg).unwrap();
        let m = DirModelParams::init(7, 4, 4, Variant::Decoupled, 1);
        assert!(matches!(
            raw_detections(&split, Some((&m, FeatureMode::Hindsight))),
            Err(crate::Error::Model(ModelError::DimensionMismatch { expected: 7, .. }))
        ));
    }

    #[test]
    fn gate_keeps_cls_below_threshold() {
        let cfg = small();
        let split = EvalSplit::build(&cfg).unwrap();
        let m = DirModelParams::init(cfg.world.feature_dim(), 4, 4, Variant::Decoupled, 1);
        let raw = raw_detections(&split, Some((&m, FeatureMode::Hindsight))).unwrap();
        let keep_all = KeepAll;
        let out = infer(&raw, FusionRule::CombinedIou, FuseMode::GeometricMean, 0.5, &keep_all).unwrap();
        for (a, b) in raw.iter().zip(&out) {
            for (x, y) in a.detections.iter().zip(&b.detections) {
                if x.cls_score < 0.5 {
                    assert_eq!(y.confidence, x.cls_score);
                } else {
                    assert_eq!(y.confidence, fuse_confidence_with(x, FusionRule::CombinedIou, FuseMode::GeometricMean).unwrap().confidence);
                }
            }
        }
    }

    /// Identity suppressor that keeps input order.
    struct KeepAll;
    impl Suppressor for KeepAll {
        fn name(&self) -> &str {
            "keep-all"
        }
        fn suppress(&self, dets: &[Detection]) -> Vec<Detection> {
            dets.to_vec()
        }
    }
}
