use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::kv::{join, KvMap};

use super::network::DirModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Scales the whole schedule; 3 reproduces the tripled-rate control.
    pub lr_multiplier: f64,
    /// Epochs at which the rate is multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Linear warm-up length in steps; 0 disables it.
    pub warmup_steps: u64,
    /// Starting fraction of the rate during warm-up.
    pub warmup_ratio: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_multiplier: 1.0,
            lr_decay_epochs: vec![8, 11],
            lr_decay_factor: 0.1,
            batch_size: 128,
            epochs: 12,
            warmup_steps: 0,
            warmup_ratio: 0.33,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(crate::Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("optim.lr must be positive, got {}", self.lr));
        }
        if !(self.lr_multiplier > 0.0) {
            return bad(format!("optim.lr_multiplier must be positive, got {}", self.lr_multiplier));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("optim.momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("optim.weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("optim.batch_size must be >= 1".into());
        }
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio <= 1.0) {
            return bad(format!("optim.warmup_ratio must lie in (0, 1], got {}", self.warmup_ratio));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &mut KvMap) -> Result<()> {
        kv.take("optim.lr", &mut self.lr)?;
        kv.take("optim.momentum", &mut self.momentum)?;
        kv.take("optim.weight_decay", &mut self.weight_decay)?;
        kv.take("optim.lr_multiplier", &mut self.lr_multiplier)?;
        kv.take_list("optim.lr_decay_epochs", &mut self.lr_decay_epochs)?;
        kv.take("optim.lr_decay_factor", &mut self.lr_decay_factor)?;
        kv.take("optim.batch_size", &mut self.batch_size)?;
        kv.take("optim.epochs", &mut self.epochs)?;
        kv.take("optim.warmup_steps", &mut self.warmup_steps)?;
        kv.take("optim.warmup_ratio", &mut self.warmup_ratio)?;
        Ok(())
    }

    pub fn echo(&self, kv: &mut KvMap) {
        kv.insert("optim.lr", self.lr);
        kv.insert("optim.momentum", self.momentum);
        kv.insert("optim.weight_decay", self.weight_decay);
        kv.insert("optim.lr_multiplier", self.lr_multiplier);
        kv.insert("optim.lr_decay_epochs", join(&self.lr_decay_epochs));
        kv.insert("optim.lr_decay_factor", self.lr_decay_factor);
        kv.insert("optim.batch_size", self.batch_size);
        kv.insert("optim.epochs", self.epochs);
        kv.insert("optim.warmup_steps", self.warmup_steps);
        kv.insert("optim.warmup_ratio", self.warmup_ratio);
    }
}

/// Momentum buffers plus the position in the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimConfig,
    pub velocity: DirModelParams,
    pub epoch: usize,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimConfig, params: &DirModelParams) -> Self {
        Self {
            config,
            velocity: params.zeros_like(),
            epoch: 0,
            step: 0,
        }
    }

    /// Rate for the current epoch and step.
    pub fn learning_rate(&self) -> f64 {
        let c = &self.config;
        let decays = c.lr_decay_epochs.iter().filter(|&&e| e <= self.epoch).count();
        let mut lr = c.lr * c.lr_multiplier * c.lr_decay_factor.powi(decays as i32);
        if self.step < c.warmup_steps {
            let frac = self.step as f64 / c.warmup_steps as f64;
            lr *= c.warmup_ratio + (1.0 - c.warmup_ratio) * frac;
        }
        lr
    }
}

/// `v <- mu*v - lr*(g + wd*w)`, `w <- w + v` for every parameter.
pub fn sgd_step(params: &mut DirModelParams, grads: &DirModelParams, opt: &mut OptimizerState) -> Result<(), ModelError> {
    if !params.same_shape(grads) || !params.same_shape(&opt.velocity) {
        return Err(ModelError::ShapeMismatch);
    }
    let lr = opt.learning_rate();
    let (mu, wd) = (opt.config.momentum, opt.config.weight_decay);
    for ((w, g), v) in params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(opt.velocity.tensors_mut())
    {
        for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi - lr * (gi + wd * *wi);
            *wi += *vi;
        }
    }
    opt.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::Variant;
    use approx::assert_abs_diff_eq;

    fn scalar_model(w: f64) -> DirModelParams {
        let mut m = DirModelParams::zeros(1, 1, 1, Variant::DirectIoU);
        m.primary.l1.weight[0] = w;
        m
    }

    fn cfg(lr: f64, wd: f64) -> OptimConfig {
        OptimConfig {
            lr,
            weight_decay: wd,
            ..Default::default()
        }
    }

    #[test]
    fn single_step_by_hand() {
        let mut m = scalar_model(1.0);
        let mut g = m.zeros_like();
        g.primary.l1.weight[0] = 0.5;
        let mut opt = OptimizerState::new(cfg(0.1, 0.0), &m);
        sgd_step(&mut m, &g, &mut opt).unwrap();
        assert_abs_diff_eq!(opt.velocity.primary.l1.weight[0], -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(m.primary.l1.weight[0], 0.95, epsilon = 1e-15);
    }

    #[test]
    fn velocity_decays_geometrically() {
        let mut m = scalar_model(1.0);
        let mut opt = OptimizerState::new(cfg(0.1, 0.0), &m);
        opt.velocity.primary.l1.weight[0] = 1.0;
        let g = m.zeros_like();
        for k in 1..=5 {
            sgd_step(&mut m, &g, &mut opt).unwrap();
            assert_abs_diff_eq!(opt.velocity.primary.l1.weight[0], 0.9f64.powi(k), epsilon = 1e-15);
        }
    }

    #[test]
    fn multiplier_equals_tripled_rate() {
        let base = scalar_model(0.7);
        let mut g = base.zeros_like();
        g.primary.l1.weight[0] = 0.3;
        let mut a = base.clone();
        let mut b = base.clone();
        let mut oa = OptimizerState::new(
            OptimConfig {
                lr_multiplier: 3.0,
                ..cfg(0.1, 1e-4)
            },
            &a,
        );
        let mut ob = OptimizerState::new(cfg(0.3, 1e-4), &b);
        for _ in 0..4 {
            sgd_step(&mut a, &g, &mut oa).unwrap();
            sgd_step(&mut b, &g, &mut ob).unwrap();
        }
        assert_abs_diff_eq!(a.primary.l1.weight[0], b.primary.l1.weight[0], epsilon = 1e-15);
    }

    #[test]
    fn schedule_decays_and_warms_up() {
        let m = scalar_model(0.0);
        let mut opt = OptimizerState::new(cfg(0.05, 0.0), &m);
        assert_abs_diff_eq!(opt.learning_rate(), 0.05, epsilon = 1e-15);
        opt.epoch = 8;
        assert_abs_diff_eq!(opt.learning_rate(), 0.005, epsilon = 1e-15);
        opt.epoch = 11;
        assert_abs_diff_eq!(opt.learning_rate(), 0.0005, epsilon = 1e-15);
        let mut warm = OptimizerState::new(
            OptimConfig {
                warmup_steps: 10,
                ..cfg(0.1, 0.0)
            },
            &m,
        );
        assert_abs_diff_eq!(warm.learning_rate(), 0.033, epsilon = 1e-15);
        warm.step = 5;
        assert_abs_diff_eq!(warm.learning_rate(), 0.1 * (0.33 + 0.67 * 0.5), epsilon = 1e-15);
        warm.step = 10;
        assert_abs_diff_eq!(warm.learning_rate(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut a = DirModelParams::zeros(2, 2, 2, Variant::Decoupled);
        let b = DirModelParams::zeros(2, 2, 2, Variant::DirectIoU);
        let mut opt = OptimizerState::new(OptimConfig::default(), &a);
        assert_eq!(sgd_step(&mut a, &b, &mut opt), Err(ModelError::ShapeMismatch));
    }
}
