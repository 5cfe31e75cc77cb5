//! RoI-style occupancy features.
//!
//! Layout of the vector, length `k*k + m*m + 4`:
//!
//! | range              | content                                                        |
//! |--------------------|----------------------------------------------------------------|
//! | `0 .. k*k`         | occupancy at the cell centers of a `k x k` grid over the box   |
//! | `k*k .. k*k + m*m` | same over the box expanded by `context_expand` about its center |
//! | last 4             | width, height, aspect `w/(w+h)`, log-area, all scaled to ~[0,1] |
//!
//! Grids are row-major with `y` as the outer index. A cell is 1 when its center lies inside
//! any ground-truth object (objects form a union), then Gaussian noise is added and the value
//! clipped to `[0, 1]`.

use rand::Rng;

use crate::geometry::BoundingBox;

use super::scene::{normal, Scene};
use super::WorldConfig;

/// Log-area is normalized as `ln(1 + LOG_AREA_GAIN * a / A) / ln(1 + LOG_AREA_GAIN)`.
const LOG_AREA_GAIN: f64 = 1000.0;

pub fn extract_features<R: Rng>(bbox: &BoundingBox, scene: &Scene, cfg: &WorldConfig, rng: &mut R) -> Vec<f64> {
    let (k, m) = (cfg.inner_grid, cfg.context_grid);
    let mut out = Vec::with_capacity(cfg.feature_dim());
    let degenerate = bbox.is_degenerate();
    occupancy_grid(bbox, k, degenerate, scene, cfg.feature_noise, rng, &mut out);
    occupancy_grid(&bbox.expand(cfg.context_expand), m, degenerate, scene, cfg.feature_noise, rng, &mut out);

    let canvas = cfg.canvas_size;
    let (w, h) = (bbox.width(), bbox.height());
    out.push(w / canvas);
    out.push(h / canvas);
    out.push(if w + h > 0.0 { w / (w + h) } else { 0.5 });
    out.push((1.0 + LOG_AREA_GAIN * bbox.area() / (canvas * canvas)).ln() / (1.0 + LOG_AREA_GAIN).ln());
    out
}

fn occupancy_grid<R: Rng>(
    region: &BoundingBox,
    n: usize,
    empty: bool,
    scene: &Scene,
    noise: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let (cw, ch) = (region.width() / n as f64, region.height() / n as f64);
    for row in 0..n {
        let cy = region.y1 + (row as f64 + 0.5) * ch;
        for col in 0..n {
            let cx = region.x1 + (col as f64 + 0.5) * cw;
            let hit = !empty && scene.gt_boxes().any(|g| g.contains_point(cx, cy));
            let z = normal(rng);
            let v = if hit { 1.0 } else { 0.0 } + noise * z;
            out.push(v.clamp(0.0, 1.0));
        }
    }
}
