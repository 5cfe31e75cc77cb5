use crate::error::SuppressionError;
use crate::geometry::iou;

use super::{ranked_indices, Detection, Suppressor};

/// Classic greedy NMS: keep the best remaining detection, drop every same-class detection
/// overlapping it by more than `lambda`, repeat.
#[derive(Debug, Clone, Copy)]
pub struct GreedyNms {
    lambda: f64,
}

impl GreedyNms {
    pub fn new(lambda: f64) -> Result<Self, SuppressionError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(SuppressionError::BadThreshold(lambda));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Suppressor for GreedyNms {
    fn name(&self) -> &str {
        "greedy"
    }

    fn suppress(&self, dets: &[Detection]) -> Vec<Detection> {
        greedy_nms(dets, self.lambda)
    }
}

/// Indices of the detections that survive, in ranking order.
pub fn greedy_nms_indices(dets: &[Detection], lambda: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in ranked_indices(dets) {
        let d = &dets[i];
        let suppressed = kept
            .iter()
            .any(|&k| dets[k].class_id == d.class_id && iou(&dets[k].bbox, &d.bbox) > lambda);
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

pub fn greedy_nms(dets: &[Detection], lambda: f64) -> Vec<Detection> {
    greedy_nms_indices(dets, lambda)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, conf: f64) -> Detection {
        Detection::new(BoundingBox::new(x1, y1, x2, y2).unwrap(), 0, conf)
    }

    /// Reference: repeatedly scan for the best remaining detection and strike out its
    /// overlaps, with every pairwise IoU precomputed.
    fn reference(dets: &[Detection], lambda: f64) -> Vec<usize> {
        let n = dets.len();
        let overlaps: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| iou(&dets[i].bbox, &dets[j].bbox)).collect())
            .collect();
        let mut alive = vec![true; n];
        let mut out = Vec::new();
        loop {
            let mut best: Option<usize> = None;
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                best = match best {
                    None => Some(i),
                    Some(b) => {
                        let (ci, cb) = (dets[i].confidence, dets[b].confidence);
                        let better = ci > cb
                            || (ci == cb && dets[i].class_id < dets[b].class_id);
                        Some(if better { i } else { b })
                    }
                };
            }
            let Some(b) = best else { break };
            out.push(b);
            alive[b] = false;
            for j in 0..n {
                if alive[j] && dets[j].class_id == dets[b].class_id && overlaps[b][j] > lambda {
                    alive[j] = false;
                }
            }
        }
        out
    }

    #[test]
    fn worked_example() {
        let dets = [
            det(0.0, 0.0, 2.0, 2.0, 0.9),
            det(0.0, 0.0, 2.0, 2.2, 0.7),
            det(10.0, 10.0, 12.0, 12.0, 0.8),
        ];
        assert!((iou(&dets[0].bbox, &dets[1].bbox) - 4.0 / 4.4).abs() < 1e-12);
        assert_eq!(greedy_nms_indices(&dets, 0.5), vec![0, 2]);
        assert_eq!(reference(&dets, 0.5), vec![0, 2]);
    }

    #[test]
    fn trivial_cases() {
        assert!(greedy_nms(&[], 0.5).is_empty());
        let one = [det(0.0, 0.0, 1.0, 1.0, 0.3)];
        assert_eq!(greedy_nms(&one, 0.5), one.to_vec());
        let two = [det(0.0, 0.0, 1.0, 1.0, 0.3), det(5.0, 5.0, 6.0, 6.0, 0.4)];
        for lambda in [0.01, 0.5, 1.0] {
            assert_eq!(greedy_nms_indices(&two, lambda), vec![1, 0]);
        }
    }

    #[test]
    fn classes_do_not_interact() {
        let mut a = det(0.0, 0.0, 2.0, 2.0, 0.9);
        let mut b = a.clone();
        b.confidence = 0.8;
        b.class_id = 1;
        assert_eq!(greedy_nms_indices(&[a.clone(), b.clone()], 0.5), vec![0, 1]);
        a.class_id = 1;
        assert_eq!(greedy_nms_indices(&[a, b], 0.5), vec![0]);
    }

    #[test]
    fn ties_break_by_class_then_index() {
        let mut dets = vec![det(0.0, 0.0, 1.0, 1.0, 0.5); 3];
        dets[0].class_id = 2;
        dets[2].bbox = BoundingBox::new(4.0, 4.0, 5.0, 5.0).unwrap();
        assert_eq!(greedy_nms_indices(&dets, 0.5), vec![1, 2, 0]);
    }

    fn arb_dets() -> impl Strategy<Value = Vec<Detection>> {
        prop::collection::vec(
            (0.0..20.0f64, 0.0..20.0f64, 0.5..8.0f64, 0.5..8.0f64, 0.0..1.0f64, 0u32..3),
            0..20,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(x, y, w, h, c, k)| {
                    let mut d = det(x, y, x + w, y + h, (c * 20.0).round() / 20.0);
                    d.class_id = k;
                    d
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_reference(dets in arb_dets(), lambda in 0.05..1.0f64) {
            prop_assert_eq!(greedy_nms_indices(&dets, lambda), reference(&dets, lambda));
        }

        #[test]
        fn output_is_antichain_and_idempotent(dets in arb_dets(), lambda in 0.05..1.0f64) {
            let kept = greedy_nms(&dets, lambda);
            for (i, a) in kept.iter().enumerate() {
                for b in &kept[i + 1..] {
                    prop_assert!(a.class_id != b.class_id || iou(&a.bbox, &b.bbox) <= lambda);
                }
            }
            prop_assert_eq!(greedy_nms(&kept, lambda), kept);
        }

        #[test]
        fn invariant_under_monotone_rescoring(dets in arb_dets(), lambda in 0.05..1.0f64) {
            let rescored: Vec<_> = dets
                .iter()
                .map(|d| Detection { confidence: d.confidence.powi(3) * 0.5 + 0.1, ..d.clone() })
                .collect();
            prop_assert_eq!(greedy_nms_indices(&dets, lambda), greedy_nms_indices(&rescored, lambda));
        }
    }
}
