use serde::{Deserialize, Serialize};

use crate::error::WorldError;
use crate::geometry::{integrity, iou, purity, BoundingBox};

use super::features::extract_features;
use super::scene::{jitter_proposal, normal, scene_rng, simulate_regression, Scene, Stream};
use super::{generate_scenes, WorldConfig};

/// Which box the IoU predictor looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Features of the proposal, before regression.
    Foresight,
    /// Features of the regressed box.
    Hindsight,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Foresight => "foresight",
            FeatureMode::Hindsight => "hindsight",
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "foresight" => Ok(FeatureMode::Foresight),
            "hindsight" => Ok(FeatureMode::Hindsight),
            other => Err(format!("unknown feature mode `{other}` (expected foresight or hindsight)")),
        }
    }
}

/// Regression targets of the regressed box against its matched ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Targets {
    pub purity: f64,
    pub integrity: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scene_id: u64,
    /// Class of the matched object, or of the source object when nothing matches.
    pub class_id: u32,
    pub proposal: BoundingBox,
    pub regressed: BoundingBox,
    pub matched_gt: Option<usize>,
    /// IoU of the proposal with the matched object.
    pub proposal_iou: f64,
    pub cls_score_sim: f64,
    pub features_foresight: Vec<f64>,
    pub features_hindsight: Vec<f64>,
    pub targets: Targets,
    pub is_positive: bool,
}

impl Sample {
    pub fn features(&self, mode: FeatureMode) -> &[f64] {
        match mode {
            FeatureMode::Foresight => &self.features_foresight,
            FeatureMode::Hindsight => &self.features_hindsight,
        }
    }

    /// IoU gained by regression against the matched object.
    pub fn delta_iou(&self) -> f64 {
        self.targets.iou - self.proposal_iou
    }
}

/// Targets of `b` against `g`; all zero without a match.
pub fn targets_for(b: &BoundingBox, g: Option<&BoundingBox>) -> Result<Targets, WorldError> {
    let Some(g) = g else {
        return Ok(Targets::default());
    };
    Ok(Targets {
        purity: purity(b, g),
        integrity: integrity(b, g)?,
        iou: iou(b, g),
    })
}

/// Generates the scenes of `cfg` and their samples at `epoch`.
pub fn build_dataset(cfg: &WorldConfig, epoch: usize) -> Result<Vec<Sample>, WorldError> {
    let scenes = generate_scenes(cfg)?;
    build_samples(cfg, &scenes, epoch)
}

/// Samples for already generated scenes.
///
/// Proposals, regression residuals and feature noise come from a per-scene stream that does not
/// depend on `epoch`; only the regression gain changes between epochs, so successive epochs are
/// directly comparable.
pub fn build_samples(cfg: &WorldConfig, scenes: &[Scene], epoch: usize) -> Result<Vec<Sample>, WorldError> {
    cfg.validate()?;
    let gamma = cfg.gamma(epoch);
    let mut out = Vec::with_capacity(scenes.len() * cfg.objects_max * cfg.proposals_per_object);
    for scene in scenes {
        let mut rng = scene_rng(cfg.seed, scene.scene_id, Stream::Proposals);
        for source in &scene.objects {
            for _ in 0..cfg.proposals_per_object {
                let proposal = jitter_proposal(&source.gt_box, cfg.jitter_scale, &scene.canvas, &mut rng);
                // the box regressor is trained toward the object the proposal is assigned to
                let target = scene
                    .best_match(&proposal)
                    .map_or(source.gt_box, |(i, _)| scene.objects[i].gt_box);
                let regressed = simulate_regression(&proposal, &target, gamma, cfg.regression_noise, &mut rng);
                let matched_gt = scene.best_match(&regressed).map(|(i, _)| i);
                let gt = matched_gt.map(|i| &scene.objects[i]);
                let targets = targets_for(&regressed, gt.map(|o| &o.gt_box))?;
                let proposal_iou = gt.map_or(0.0, |o| iou(&proposal, &o.gt_box));
                let cls_score_sim = (proposal_iou + cfg.cls_score_noise * normal(&mut rng)).clamp(0.0, 1.0);
                let features_foresight = extract_features(&proposal, scene, cfg, &mut rng);
                let features_hindsight = extract_features(&regressed, scene, cfg, &mut rng);
                out.push(Sample {
                    scene_id: scene.scene_id,
                    class_id: gt.map_or(source.class_id, |o| o.class_id),
                    proposal,
                    regressed,
                    matched_gt,
                    proposal_iou,
                    cls_score_sim,
                    features_foresight,
                    features_hindsight,
                    targets,
                    is_positive: matched_gt.is_some() && proposal_iou >= cfg.positive_iou,
                });
            }
        }
    }
    Ok(out)
}

pub fn select_positives(samples: &[Sample]) -> Vec<Sample> {
    samples.iter().filter(|s| s.is_positive).cloned().collect()
}
