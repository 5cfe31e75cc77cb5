use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::WorldError;
use crate::geometry::{iou, BoundingBox};

use super::WorldConfig;

const PLACEMENT_ATTEMPTS: usize = 100;

/// Random streams drawn per scene.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Layout = 0,
    Proposals = 1,
}

/// Deterministic generator for one (seed, scene, stream) triple.
pub(crate) fn scene_rng(seed: u64, scene_id: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((scene_id << 2) | stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub gt_box: BoundingBox,
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: u64,
    pub canvas: BoundingBox,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn gt_boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.objects.iter().map(|o| &o.gt_box)
    }

    /// Index and IoU of the object overlapping `b` most; earlier objects win ties. `None` when
    /// nothing overlaps.
    pub fn best_match(&self, b: &BoundingBox) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            let v = iou(b, &o.gt_box);
            if v > best.map_or(0.0, |(_, bv)| bv) {
                best = Some((i, v));
            }
        }
        best
    }
}

pub fn generate_scenes(cfg: &WorldConfig) -> Result<Vec<Scene>, WorldError> {
    cfg.validate()?;
    Ok((0..cfg.num_scenes as u64)
        .map(|i| generate_scene(cfg, cfg.scene_id_offset + i))
        .collect())
}

fn generate_scene(cfg: &WorldConfig, scene_id: u64) -> Scene {
    let mut rng = scene_rng(cfg.seed, scene_id, Stream::Layout);
    let canvas = cfg.canvas();
    let count = rng.random_range(cfg.objects_min..=cfg.objects_max);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let w = uniform(&mut rng, cfg.object_size_min, cfg.object_size_max);
            let h = uniform(&mut rng, cfg.object_size_min, cfg.object_size_max);
            let x = uniform(&mut rng, 0.0, cfg.canvas_size - w);
            let y = uniform(&mut rng, 0.0, cfg.canvas_size - h);
            let class_id = rng.random_range(0..cfg.num_classes);
            let gt_box = BoundingBox {
                x1: x,
                y1: y,
                x2: x + w,
                y2: y + h,
            };
            if objects.iter().all(|o| iou(&o.gt_box, &gt_box) <= cfg.max_object_iou) {
                objects.push(SceneObject { gt_box, class_id });
                break;
            }
        }
    }
    Scene {
        scene_id,
        canvas,
        objects,
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[inline]
pub(crate) fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Perturbs each corner of `gt` by Gaussian noise scaled with the box extent, then clips the
/// result to `canvas`. Always draws four normals, whatever `sigma_j` is.
pub fn jitter_proposal<R: Rng>(gt: &BoundingBox, sigma_j: f64, canvas: &BoundingBox, rng: &mut R) -> BoundingBox {
    let (w, h) = (gt.width(), gt.height());
    let x1 = gt.x1 + sigma_j * w * normal(rng);
    let y1 = gt.y1 + sigma_j * h * normal(rng);
    let x2 = gt.x2 + sigma_j * w * normal(rng);
    let y2 = gt.y2 + sigma_j * h * normal(rng);
    BoundingBox::from_corners(x1, y1, x2, y2).clip_to(canvas)
}

/// Moves every coordinate of `p` a fraction `gamma` toward `g`, plus Gaussian residual noise of
/// `sigma_r` times the object extent.
pub fn simulate_regression<R: Rng>(
    p: &BoundingBox,
    g: &BoundingBox,
    gamma: f64,
    sigma_r: f64,
    rng: &mut R,
) -> BoundingBox {
    let (sx, sy) = (sigma_r * g.width(), sigma_r * g.height());
    let step = |from: f64, to: f64| from + gamma * (to - from);
    let x1 = step(p.x1, g.x1) + sx * normal(rng);
    let y1 = step(p.y1, g.y1) + sy * normal(rng);
    let x2 = step(p.x2, g.x2) + sx * normal(rng);
    let y2 = step(p.y2, g.y2) + sy * normal(rng);
    BoundingBox::from_corners(x1, y1, x2, y2)
}
