use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};
use crate::geometry::iou;
use crate::kv::{join, KvMap};
use crate::suppression::{ranked_indices, Detection};
use crate::world::SceneObject;

/// Settings shared by AP, histograms and the correlation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Strictly increasing, inside (0, 1).
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    /// Highest-confidence detections kept per scene before matching.
    pub max_dets: usize,
    pub hist_bin_width: f64,
    /// Restrict the correlation study to samples whose true IoU exceeds `pearson_min_iou`.
    pub pearson_filter: bool,
    pub pearson_min_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: coco_thresholds(),
            recall_points: 101,
            max_dets: 100,
            hist_bin_width: 0.05,
            pearson_filter: true,
            pearson_min_iou: 0.5,
        }
    }
}

/// 0.50, 0.55, ..., 0.95 without accumulated rounding.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(crate::Error::Config(m));
        let t = &self.iou_thresholds;
        if t.is_empty() {
            return bad("eval.iou_thresholds is empty".into());
        }
        if t.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return bad(format!("eval.iou_thresholds must lie in (0, 1): {}", join(t)));
        }
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("eval.iou_thresholds must be strictly increasing: {}", join(t)));
        }
        if self.recall_points < 2 {
            return bad("eval.recall_points must be >= 2".into());
        }
        if self.max_dets == 0 {
            return bad("eval.max_dets must be >= 1".into());
        }
        if !(self.hist_bin_width > 0.0 && self.hist_bin_width <= 1.0) {
            return bad(format!("eval.hist_bin_width must lie in (0, 1], got {}", self.hist_bin_width));
        }
        if !(0.0..1.0).contains(&self.pearson_min_iou) {
            return bad(format!("eval.pearson_min_iou must lie in [0, 1), got {}", self.pearson_min_iou));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &mut KvMap) -> Result<()> {
        kv.take_list("eval.iou_thresholds", &mut self.iou_thresholds)?;
        kv.take("eval.recall_points", &mut self.recall_points)?;
        kv.take("eval.max_dets", &mut self.max_dets)?;
        kv.take("eval.hist_bin_width", &mut self.hist_bin_width)?;
        kv.take("eval.pearson_filter", &mut self.pearson_filter)?;
        kv.take("eval.pearson_min_iou", &mut self.pearson_min_iou)?;
        Ok(())
    }

    pub fn echo(&self, kv: &mut KvMap) {
        kv.insert("eval.iou_thresholds", join(&self.iou_thresholds));
        kv.insert("eval.recall_points", self.recall_points);
        kv.insert("eval.max_dets", self.max_dets);
        kv.insert("eval.hist_bin_width", self.hist_bin_width);
        kv.insert("eval.pearson_filter", self.pearson_filter);
        kv.insert("eval.pearson_min_iou", self.pearson_min_iou);
    }
}

/// Detections and ground truth of one scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneEval {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<SceneObject>,
}

/// Greedy matching of ranked detections.
///
/// Each detection, in the given order, takes the unmatched same-class object with the highest
/// IoU, provided that IoU is at least `t`; the earliest object wins IoU ties.
pub fn match_detections(dets: &[Detection], gts: &[SceneObject], t: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if taken[j] || g.class_id != d.class_id {
                    continue;
                }
                let v = iou(&d.bbox, &g.gt_box);
                if v >= t && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    taken[j] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Per-scene detections ranked by confidence and cut to `max_dets`.
fn ranked_scene(dets: &[Detection], max_dets: usize) -> Vec<Detection> {
    let mut order = ranked_indices(dets);
    order.truncate(max_dets);
    order.into_iter().map(|i| dets[i].clone()).collect()
}

/// Interpolated AP of one PR list. `hits` holds (confidence, tp) in evaluation order.
fn interpolated_ap(mut hits: Vec<(f64, bool)>, num_gt: usize, recall_points: usize) -> f64 {
    // stable sort keeps scene order, then per-scene rank, among equal confidences
    hits.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(_, hit) in &hits {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let last = (recall_points - 1) as f64;
    let mut sum = 0.0;
    for k in 0..recall_points {
        let r = k as f64 / last;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    sum / recall_points as f64
}

/// AP at one IoU threshold, averaged over classes that have ground truth.
pub fn average_precision(scenes: &[SceneEval], t: f64, cfg: &EvalConfig) -> Result<f64> {
    let ranked: Vec<Vec<Detection>> = scenes.iter().map(|s| ranked_scene(&s.detections, cfg.max_dets)).collect();
    average_precision_ranked(scenes, &ranked, t, cfg)
}

fn average_precision_ranked(scenes: &[SceneEval], ranked: &[Vec<Detection>], t: f64, cfg: &EvalConfig) -> Result<f64> {
    let mut classes: Vec<u32> = scenes
        .iter()
        .flat_map(|s| s.ground_truth.iter().map(|g| g.class_id))
        .collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(MetricsError::NoGroundTruth.into());
    }
    let mut total = 0.0;
    for &class in &classes {
        let mut hits = Vec::new();
        let mut num_gt = 0;
        for (scene, dets) in scenes.iter().zip(ranked) {
            let gts: Vec<SceneObject> = scene.ground_truth.iter().filter(|g| g.class_id == class).cloned().collect();
            num_gt += gts.len();
            let dets: Vec<Detection> = dets.iter().filter(|d| d.class_id == class).cloned().collect();
            let flags = match_detections(&dets, &gts, t);
            hits.extend(dets.iter().zip(flags).map(|(d, f)| (d.confidence, f)));
        }
        total += interpolated_ap(hits, num_gt, cfg.recall_points);
    }
    Ok(total / classes.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSummary {
    /// Mean over `EvalConfig::iou_thresholds`.
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub per_threshold: Vec<(f64, f64)>,
}

pub fn ap_summary(scenes: &[SceneEval], cfg: &EvalConfig) -> Result<ApSummary> {
    cfg.validate()?;
    let ranked: Vec<Vec<Detection>> = scenes.iter().map(|s| ranked_scene(&s.detections, cfg.max_dets)).collect();
    let at = |t: f64| average_precision_ranked(scenes, &ranked, t, cfg);
    let per_threshold = cfg
        .iou_thresholds
        .iter()
        .map(|&t| at(t).map(|v| (t, v)))
        .collect::<Result<Vec<_>>>()?;
    let lookup = |t: f64| match per_threshold.iter().find(|(x, _)| (x - t).abs() < 1e-9) {
        Some(&(_, v)) => Ok(v),
        None => at(t),
    };
    Ok(ApSummary {
        ap: per_threshold.iter().map(|(_, v)| v).sum::<f64>() / per_threshold.len() as f64,
        ap50: lookup(0.5)?,
        ap75: lookup(0.75)?,
        per_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;

    fn obj(x1: f64, y1: f64, x2: f64, y2: f64, class_id: u32) -> SceneObject {
        SceneObject {
            gt_box: BoundingBox::new(x1, y1, x2, y2).unwrap(),
            class_id,
        }
    }

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, class_id: u32, conf: f64) -> Detection {
        Detection::new(BoundingBox::new(x1, y1, x2, y2).unwrap(), class_id, conf)
    }

    /// A detection with IoU exactly 0.6 against (0,0,10,10): (0,0,10,6).
    fn iou_point_six() -> (SceneObject, Detection) {
        let g = obj(0.0, 0.0, 10.0, 10.0, 0);
        let d = det(0.0, 0.0, 10.0, 6.0, 0, 0.9);
        assert_eq!(iou(&d.bbox, &g.gt_box), 0.6);
        (g, d)
    }

    #[test]
    fn thresholds_are_exact() {
        let t = coco_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
        assert!(EvalConfig::default().validate().is_ok());
    }

    #[test]
    fn config_rejects_unsorted_thresholds() {
        let mut c = EvalConfig::default();
        c.iou_thresholds = vec![0.5, 0.5];
        assert!(c.validate().unwrap_err().is_config());
        c.iou_thresholds = vec![0.0, 0.5];
        assert!(c.validate().is_err());
        c.iou_thresholds = vec![0.75, 0.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn matching_examples() {
        let g = obj(0.0, 0.0, 10.0, 10.0, 0);
        assert_eq!(match_detections(&[det(0.0, 0.0, 10.0, 10.0, 0, 1.0)], &[g], 0.5), [true]);
        let two = [det(0.0, 0.0, 10.0, 10.0, 0, 0.9), det(0.0, 0.0, 10.0, 10.0, 0, 0.8)];
        assert_eq!(match_detections(&two, &[g], 0.5), [true, false]);
        let (g6, d6) = iou_point_six();
        assert_eq!(match_detections(std::slice::from_ref(&d6), &[g6], 0.5), [true]);
        assert_eq!(match_detections(&[d6], &[g6], 0.75), [false]);
        // class mismatch never matches
        assert_eq!(match_detections(&[det(0.0, 0.0, 10.0, 10.0, 1, 1.0)], &[g], 0.5), [false]);
    }

    #[test]
    fn matching_prefers_best_unmatched() {
        let a = obj(0.0, 0.0, 10.0, 10.0, 0);
        let b = obj(2.0, 0.0, 12.0, 10.0, 0);
        // first detection sits on b; the second overlaps both and falls back to a
        let d1 = det(2.0, 0.0, 12.0, 10.0, 0, 0.9);
        let d2 = det(1.0, 0.0, 11.0, 10.0, 0, 0.8);
        assert_eq!(match_detections(&[d1, d2], &[a, b], 0.5), [true, true]);
    }

    #[test]
    fn hand_ap_cases() {
        let cfg = EvalConfig::default();
        let (g, d) = iou_point_six();
        let scenes = [SceneEval {
            detections: vec![d],
            ground_truth: vec![g],
        }];
        assert_eq!(average_precision(&scenes, 0.5, &cfg).unwrap(), 1.0);
        assert_eq!(average_precision(&scenes, 0.75, &cfg).unwrap(), 0.0);
        let s = ap_summary(&scenes, &cfg).unwrap();
        assert_eq!((s.ap50, s.ap75), (1.0, 0.0));
        // thresholds 0.50, 0.55, 0.60 pass
        assert!((s.ap - 0.3).abs() < 1e-15);

        let exact = [SceneEval {
            detections: vec![det(0.0, 0.0, 10.0, 10.0, 0, 0.3)],
            ground_truth: vec![g],
        }];
        assert_eq!(average_precision(&exact, 0.95, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn hand_pr_curve() {
        // ranked: TP, FP, TP over two objects
        let cfg = EvalConfig::default();
        let scenes = [SceneEval {
            detections: vec![
                det(0.0, 0.0, 10.0, 10.0, 0, 0.9),
                det(50.0, 50.0, 60.0, 60.0, 0, 0.8),
                det(20.0, 0.0, 30.0, 10.0, 0, 0.7),
            ],
            ground_truth: vec![obj(0.0, 0.0, 10.0, 10.0, 0), obj(20.0, 0.0, 30.0, 10.0, 0)],
        }];
        // precision 1 for r <= 0.5 (51 points), envelope 2/3 for 0.5 < r <= 1 (50 points)
        let want = (51.0 + 50.0 * 2.0 / 3.0) / 101.0;
        assert!((average_precision(&scenes, 0.5, &cfg).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        let scenes = [SceneEval {
            detections: vec![det(0.0, 0.0, 1.0, 1.0, 0, 1.0)],
            ground_truth: vec![],
        }];
        assert!(matches!(
            average_precision(&scenes, 0.5, &EvalConfig::default()),
            Err(crate::Error::Metrics(MetricsError::NoGroundTruth))
        ));
    }

    #[test]
    fn classes_are_averaged() {
        let cfg = EvalConfig::default();
        let scenes = [SceneEval {
            detections: vec![det(0.0, 0.0, 10.0, 10.0, 0, 0.9)],
            ground_truth: vec![obj(0.0, 0.0, 10.0, 10.0, 0), obj(20.0, 0.0, 30.0, 10.0, 1)],
        }];
        assert_eq!(average_precision(&scenes, 0.5, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn max_dets_cuts_low_confidence() {
        let cfg = EvalConfig {
            max_dets: 1,
            ..Default::default()
        };
        let scenes = [SceneEval {
            detections: vec![det(50.0, 50.0, 60.0, 60.0, 0, 0.9), det(0.0, 0.0, 10.0, 10.0, 0, 0.1)],
            ground_truth: vec![obj(0.0, 0.0, 10.0, 10.0, 0)],
        }];
        assert_eq!(average_precision(&scenes, 0.5, &cfg).unwrap(), 0.0);
    }

    fn arb_scene() -> impl Strategy<Value = SceneEval> {
        let b = (0.0..50.0f64, 0.0..50.0f64, 1.0..20.0f64, 1.0..20.0f64);
        (
            prop::collection::vec((b.clone(), 0u32..2), 1..5),
            prop::collection::vec((b, 0u32..2, 0.0..1.0f64), 0..12),
        )
            .prop_map(|(g, d)| SceneEval {
                ground_truth: g
                    .into_iter()
                    .map(|((x, y, w, h), c)| obj(x, y, x + w, y + h, c))
                    .collect(),
                detections: d
                    .into_iter()
                    .map(|((x, y, w, h), c, s)| det(x, y, x + w, y + h, c, s))
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn ap_is_bounded_and_monotone_in_threshold(scenes in prop::collection::vec(arb_scene(), 1..4)) {
            let cfg = EvalConfig::default();
            let mut prev = f64::INFINITY;
            for &t in &cfg.iou_thresholds {
                let ap = average_precision(&scenes, t, &cfg).unwrap();
                prop_assert!((0.0..=1.0).contains(&ap));
                prop_assert!(ap <= prev + 1e-12);
                prev = ap;
            }
        }

        #[test]
        fn perfect_detector_scores_one(scenes in prop::collection::vec(arb_scene(), 1..4)) {
            let cfg = EvalConfig::default();
            let perfect: Vec<SceneEval> = scenes
                .iter()
                .map(|s| SceneEval {
                    detections: s.ground_truth.iter().map(|g| Detection::new(g.gt_box, g.class_id, 1.0)).collect(),
                    ground_truth: s.ground_truth.clone(),
                })
                .collect();
            let s = ap_summary(&perfect, &cfg).unwrap();
            prop_assert_eq!(s.ap, 1.0);
            for (_, v) in s.per_threshold {
                prop_assert_eq!(v, 1.0);
            }
        }

        #[test]
        fn true_positives_bounded(scene in arb_scene(), t in 0.1..0.9f64) {
            let dets = ranked_scene(&scene.detections, 100);
            for class in 0..2 {
                let d: Vec<_> = dets.iter().filter(|d| d.class_id == class).cloned().collect();
                let g: Vec<_> = scene.ground_truth.iter().filter(|g| g.class_id == class).cloned().collect();
                let tp = match_detections(&d, &g, t).into_iter().filter(|&x| x).count();
                prop_assert!(tp <= d.len().min(g.len()));
            }
        }

        #[test]
        fn permuting_equal_boxes_keeps_ap(scene in arb_scene(), seed in 0u64..1000) {
            // identical boxes: permuting their confidences cannot change AP
            let b = scene.ground_truth[0].gt_box;
            let class = scene.ground_truth[0].class_id;
            let confs: Vec<f64> = (0..5).map(|i| ((seed + i * 37) % 101) as f64 / 100.0).collect();
            let mk = |c: &[f64]| SceneEval {
                detections: c.iter().map(|&s| Detection::new(b, class, s)).collect(),
                ground_truth: scene.ground_truth.clone(),
            };
            let mut rev = confs.clone();
            rev.reverse();
            let cfg = EvalConfig::default();
            prop_assert_eq!(
                ap_summary(&[mk(&confs)], &cfg).unwrap(),
                ap_summary(&[mk(&rev)], &cfg).unwrap()
            );
        }
    }
}
