use serde::{Deserialize, Serialize};

use crate::error::{Result, WorldError};
use crate::geometry::BoundingBox;
use crate::kv::KvMap;

/// Parameters of the synthetic detection world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub num_scenes: usize,
    /// First scene id; disjoint id ranges give disjoint random streams.
    pub scene_id_offset: u64,
    /// Side of the square canvas `[0, canvas_size]^2`.
    pub canvas_size: f64,
    pub objects_min: usize,
    pub objects_max: usize,
    pub object_size_min: f64,
    pub object_size_max: f64,
    /// Placement retries reject objects overlapping an earlier one by more than this IoU.
    pub max_object_iou: f64,
    pub num_classes: u32,
    pub proposals_per_object: usize,
    /// Proposal corner jitter, relative to object width/height.
    pub jitter_scale: f64,
    /// Regression gain schedule `min(gamma_max, gamma_start + gamma_step * epoch)`.
    pub gamma_start: f64,
    pub gamma_step: f64,
    pub gamma_max: f64,
    /// Regression residual noise, relative to object width/height.
    pub regression_noise: f64,
    pub inner_grid: usize,
    pub context_grid: usize,
    pub context_expand: f64,
    pub feature_noise: f64,
    pub cls_score_noise: f64,
    pub positive_iou: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_scenes: 2000,
            scene_id_offset: 0,
            canvas_size: 100.0,
            objects_min: 1,
            objects_max: 4,
            object_size_min: 12.0,
            object_size_max: 40.0,
            max_object_iou: 0.1,
            num_classes: 3,
            proposals_per_object: 8,
            jitter_scale: 0.3,
            gamma_start: 0.2,
            gamma_step: 0.07,
            gamma_max: 0.9,
            regression_noise: 0.05,
            inner_grid: 8,
            context_grid: 8,
            context_expand: 2.0,
            feature_noise: 0.05,
            cls_score_noise: 0.4,
            positive_iou: 0.5,
        }
    }
}

impl WorldConfig {
    pub fn canvas(&self) -> BoundingBox {
        BoundingBox {
            x1: 0.0,
            y1: 0.0,
            x2: self.canvas_size,
            y2: self.canvas_size,
        }
    }

    pub fn gamma(&self, epoch: usize) -> f64 {
        (self.gamma_start + self.gamma_step * epoch as f64).min(self.gamma_max)
    }

    pub fn feature_dim(&self) -> usize {
        self.inner_grid * self.inner_grid + self.context_grid * self.context_grid + 4
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidConfig(m));
        for (name, v) in [
            ("jitter_scale", self.jitter_scale),
            ("regression_noise", self.regression_noise),
            ("feature_noise", self.feature_noise),
            ("cls_score_noise", self.cls_score_noise),
            ("max_object_iou", self.max_object_iou),
            ("gamma_step", self.gamma_step),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if self.inner_grid == 0 || self.context_grid == 0 {
            return bad("grid sizes must be >= 1".into());
        }
        if !(self.context_expand >= 1.0) {
            return bad(format!("context_expand must be >= 1, got {}", self.context_expand));
        }
        if !(self.positive_iou > 0.0 && self.positive_iou < 1.0) {
            return bad(format!("positive_iou must lie in (0, 1), got {}", self.positive_iou));
        }
        if !((0.0..=1.0).contains(&self.gamma_start) && self.gamma_max >= 0.0 && self.gamma_max <= 1.0) {
            return bad("gamma_start and gamma_max must lie in [0, 1]".into());
        }
        if self.objects_min == 0 || self.objects_min > self.objects_max {
            return bad(format!(
                "objects per scene range [{}, {}] is invalid",
                self.objects_min, self.objects_max
            ));
        }
        if self.num_classes == 0 {
            return bad("num_classes must be >= 1".into());
        }
        if !(self.canvas_size > 0.0 && self.canvas_size.is_finite()) {
            return bad(format!("canvas_size must be positive, got {}", self.canvas_size));
        }
        if !(self.object_size_min > 0.0
            && self.object_size_min <= self.object_size_max
            && self.object_size_max <= self.canvas_size)
        {
            return Err(WorldError::InfeasibleSize {
                min: self.object_size_min,
                max: self.object_size_max,
                canvas: self.canvas_size,
            });
        }
        Ok(())
    }

    /// Reads `world.*` keys.
    pub fn apply(&mut self, kv: &mut KvMap) -> Result<()> {
        kv.take("world.seed", &mut self.seed)?;
        kv.take("world.num_scenes", &mut self.num_scenes)?;
        kv.take("world.scene_id_offset", &mut self.scene_id_offset)?;
        kv.take("world.canvas_size", &mut self.canvas_size)?;
        kv.take("world.objects_min", &mut self.objects_min)?;
        kv.take("world.objects_max", &mut self.objects_max)?;
        kv.take("world.object_size_min", &mut self.object_size_min)?;
        kv.take("world.object_size_max", &mut self.object_size_max)?;
        kv.take("world.max_object_iou", &mut self.max_object_iou)?;
        kv.take("world.num_classes", &mut self.num_classes)?;
        kv.take("world.proposals_per_object", &mut self.proposals_per_object)?;
        kv.take("world.jitter_scale", &mut self.jitter_scale)?;
        kv.take("world.gamma_start", &mut self.gamma_start)?;
        kv.take("world.gamma_step", &mut self.gamma_step)?;
        kv.take("world.gamma_max", &mut self.gamma_max)?;
        kv.take("world.regression_noise", &mut self.regression_noise)?;
        kv.take("world.inner_grid", &mut self.inner_grid)?;
        kv.take("world.context_grid", &mut self.context_grid)?;
        kv.take("world.context_expand", &mut self.context_expand)?;
        kv.take("world.feature_noise", &mut self.feature_noise)?;
        kv.take("world.cls_score_noise", &mut self.cls_score_noise)?;
        kv.take("world.positive_iou", &mut self.positive_iou)?;
        Ok(())
    }

    pub fn echo(&self, kv: &mut KvMap) {
        kv.insert("world.seed", self.seed);
        kv.insert("world.num_scenes", self.num_scenes);
        kv.insert("world.scene_id_offset", self.scene_id_offset);
        kv.insert("world.canvas_size", self.canvas_size);
        kv.insert("world.objects_min", self.objects_min);
        kv.insert("world.objects_max", self.objects_max);
        kv.insert("world.object_size_min", self.object_size_min);
        kv.insert("world.object_size_max", self.object_size_max);
        kv.insert("world.max_object_iou", self.max_object_iou);
        kv.insert("world.num_classes", self.num_classes);
        kv.insert("world.proposals_per_object", self.proposals_per_object);
        kv.insert("world.jitter_scale", self.jitter_scale);
        kv.insert("world.gamma_start", self.gamma_start);
        kv.insert("world.gamma_step", self.gamma_step);
        kv.insert("world.gamma_max", self.gamma_max);
        kv.insert("world.regression_noise", self.regression_noise);
        kv.insert("world.inner_grid", self.inner_grid);
        kv.insert("world.context_grid", self.context_grid);
        kv.insert("world.context_expand", self.context_expand);
        kv.insert("world.feature_noise", self.feature_noise);
        kv.insert("world.cls_score_noise", self.cls_score_noise);
        kv.insert("world.positive_iou", self.positive_iou);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = WorldConfig::default();
        c.validate().unwrap();
        assert_eq!(c.feature_dim(), 132);
        assert_eq!(c.gamma(0), 0.2);
        assert!((c.gamma(5) - 0.55).abs() < 1e-12);
        assert_eq!(c.gamma(11), 0.9);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = WorldConfig::default();
        c.seed = 9;
        c.feature_noise = 0.125;
        let mut kv = KvMap::default();
        c.echo(&mut kv);
        let mut back = WorldConfig::default();
        back.apply(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_failures() {
        let cases: Vec<Box<dyn Fn(&mut WorldConfig)>> = vec![
            Box::new(|c| c.jitter_scale = -0.1),
            Box::new(|c| c.inner_grid = 0),
            Box::new(|c| c.context_expand = 0.5),
            Box::new(|c| c.positive_iou = 1.0),
            Box::new(|c| c.gamma_max = 1.5),
            Box::new(|c| c.objects_min = 0),
        ];
        for f in cases {
            let mut c = WorldConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(WorldError::InvalidConfig(_))));
        }
        let c = WorldConfig {
            object_size_min: 50.0,
            object_size_max: 20.0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(WorldError::InfeasibleSize { .. })));
        let c = WorldConfig {
            object_size_max: 200.0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(WorldError::InfeasibleSize { .. })));
    }
}
