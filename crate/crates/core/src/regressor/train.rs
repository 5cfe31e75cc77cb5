use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::kv::KvMap;
use crate::world::{build_samples, generate_scenes, FeatureMode, Sample, WorldConfig};

use super::loss::{DirLoss, Losses, DEFAULT_BCE_EPS};
use super::network::{DirModelParams, Variant};
use super::optim::{sgd_step, OptimConfig, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub h1: usize,
    pub h2: usize,
    pub seed: u64,
    pub bce_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Decoupled,
            h1: 64,
            h2: 64,
            seed: 7,
            bce_eps: DEFAULT_BCE_EPS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h1 == 0 || self.h2 == 0 {
            return Err(crate::Error::Config("model.h1 and model.h2 must be >= 1".into()));
        }
        if !(self.bce_eps > 0.0 && self.bce_eps < 0.5) {
            return Err(crate::Error::Config(format!("model.bce_eps must lie in (0, 0.5), got {}", self.bce_eps)));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &mut KvMap) -> Result<()> {
        kv.take("model.variant", &mut self.variant)?;
        kv.take("model.h1", &mut self.h1)?;
        kv.take("model.h2", &mut self.h2)?;
        kv.take("model.seed", &mut self.seed)?;
        kv.take("model.bce_eps", &mut self.bce_eps)?;
        Ok(())
    }

    pub fn echo(&self, kv: &mut KvMap) {
        kv.insert("model.variant", self.variant);
        kv.insert("model.h1", self.h1);
        kv.insert("model.h2", self.h2);
        kv.insert("model.seed", self.seed);
        kv.insert("model.bce_eps", self.bce_eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub samples: usize,
    /// Batch-size weighted mean of the per-batch losses seen during the epoch.
    pub losses: Losses,
    pub mean_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Variant,
    pub feature_mode: FeatureMode,
    pub epochs: Vec<EpochStats>,
    /// Not reproducible; excluded from determinism checks.
    #[serde(with = "secs")]
    pub wall_time: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

/// Trains a regressor on the positive samples of `world`, rebuilding the dataset every epoch
/// so the simulated box regressor can drift underneath the IoU predictor.
pub fn train(
    world: &WorldConfig,
    model_cfg: &ModelConfig,
    opt_cfg: &OptimConfig,
    mode: FeatureMode,
) -> Result<(DirModelParams, TrainReport)> {
    let scenes = generate_scenes(world)?;
    train_on(world, &scenes, model_cfg, opt_cfg, mode)
}

/// [`train`] on already generated scenes.
pub fn train_on(
    world: &WorldConfig,
    scenes: &[crate::world::Scene],
    model_cfg: &ModelConfig,
    opt_cfg: &OptimConfig,
    mode: FeatureMode,
) -> Result<(DirModelParams, TrainReport)> {
    model_cfg.validate()?;
    opt_cfg.validate()?;
    let started = Instant::now();
    let mut params = DirModelParams::init(world.feature_dim(), model_cfg.h1, model_cfg.h2, model_cfg.variant, model_cfg.seed);
    let mut opt = OptimizerState::new(opt_cfg.clone(), &params);
    let loss = DirLoss {
        eps: model_cfg.bce_eps,
    };
    let mut epochs = Vec::with_capacity(opt_cfg.epochs);
    for epoch in 0..opt_cfg.epochs {
        opt.epoch = epoch;
        let positives: Vec<Sample> = build_samples(world, scenes, epoch)?
            .into_iter()
            .filter(|s| s.is_positive)
            .collect();
        if positives.is_empty() {
            return Err(ModelError::NoPositives.into());
        }
        let mut order: Vec<usize> = (0..positives.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(model_cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut sum = Losses::default();
        let mut grad_norm = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(opt_cfg.batch_size) {
            let items = chunk.iter().map(|&i| (positives[i].features(mode), positives[i].targets));
            let (l, grads) = loss.backward_raw(&params, items)?;
            let w = chunk.len() as f64;
            sum.purity += l.purity * w;
            sum.integrity += l.integrity * w;
            sum.iou += l.iou * w;
            grad_norm += grads.norm();
            batches += 1;
            sgd_step(&mut params, &grads, &mut opt)?;
        }
        let n = positives.len() as f64;
        let losses = Losses {
            purity: sum.purity / n,
            integrity: sum.integrity / n,
            iou: sum.iou / n,
            total: (sum.purity + sum.integrity + sum.iou) / n,
        };
        if !params.is_finite() {
            return Err(ModelError::Diverged(epoch).into());
        }
        epochs.push(EpochStats {
            epoch,
            learning_rate: opt.learning_rate(),
            samples: positives.len(),
            losses,
            mean_grad_norm: grad_norm / batches as f64,
        });
    }
    let report = TrainReport {
        variant: model_cfg.variant,
        feature_mode: mode,
        epochs,
        wall_time: started.elapsed(),
    };
    Ok((params, report))
}
