use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::metrics::EvalConfig;
use crate::regressor::{ModelConfig, OptimConfig};
use crate::suppression::{FuseMode, FusionRule, NmsParams, SuppressorRegistry};
use crate::world::{FeatureMode, WorldConfig};

/// Everything one run needs, read from flat `key = value` text.
///
/// Unknown keys are rejected. [`ExperimentConfig::canonical`] echoes every value, defaults
/// included, and its hash names the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Training split.
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub optim: OptimConfig,
    pub eval: EvalConfig,
    pub feature_mode_train: FeatureMode,
    pub feature_mode_infer: FeatureMode,
    /// Classification-score gate `a`: fusion applies to detections with `cls >= a`.
    pub gate: f64,
    pub fusion: FusionRule,
    pub fuse_mode: FuseMode,
    pub nms_method: String,
    pub nms: NmsParams,
    pub eval_num_scenes: usize,
    /// First scene id of the evaluation split; must not overlap the training ids.
    pub eval_scene_offset: u64,
    /// Rate multiplier of the tripled-rate control in the ablation.
    pub ablate_lr_multiplier: f64,
    /// Worker threads for the ablation's independent trainings. Results do not depend on it.
    pub ablate_threads: usize,
    /// Regression epoch of the dataset written by `gen-data`.
    pub data_epoch: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            model: ModelConfig::default(),
            optim: OptimConfig::default(),
            eval: EvalConfig::default(),
            feature_mode_train: FeatureMode::Hindsight,
            feature_mode_infer: FeatureMode::Hindsight,
            gate: 0.05,
            fusion: FusionRule::CombinedIou,
            fuse_mode: FuseMode::GeometricMean,
            nms_method: "greedy".into(),
            nms: NmsParams::default(),
            eval_num_scenes: 500,
            eval_scene_offset: 1 << 40,
            ablate_lr_multiplier: 3.0,
            ablate_threads: 1,
            data_epoch: 0,
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text)?;
        let mut cfg = Self::default();
        cfg.world.apply(&mut kv)?;
        cfg.model.apply(&mut kv)?;
        cfg.optim.apply(&mut kv)?;
        cfg.eval.apply(&mut kv)?;
        kv.take("train.feature_mode", &mut cfg.feature_mode_train)?;
        kv.take("infer.feature_mode", &mut cfg.feature_mode_infer)?;
        kv.take("infer.gate", &mut cfg.gate)?;
        kv.take("infer.fusion", &mut cfg.fusion)?;
        kv.take("infer.fuse_mode", &mut cfg.fuse_mode)?;
        kv.take("nms.method", &mut cfg.nms_method)?;
        kv.take("nms.lambda", &mut cfg.nms.lambda)?;
        kv.take("nms.nt", &mut cfg.nms.nt)?;
        kv.take("nms.sigma", &mut cfg.nms.sigma)?;
        kv.take("nms.score_floor", &mut cfg.nms.score_floor)?;
        kv.take("eval.num_scenes", &mut cfg.eval_num_scenes)?;
        kv.take("eval.scene_offset", &mut cfg.eval_scene_offset)?;
        kv.take("ablate.lr_multiplier", &mut cfg.ablate_lr_multiplier)?;
        kv.take("ablate.threads", &mut cfg.ablate_threads)?;
        kv.take("data.epoch", &mut cfg.data_epoch)?;
        let mut out = cfg.output_dir.display().to_string();
        kv.take("output.dir", &mut out)?;
        cfg.output_dir = PathBuf::from(out);
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Seeds the world and the model initialization from one value.
    pub fn override_seed(&mut self, seed: u64) {
        self.world.seed = seed;
        self.model.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.optim.validate()?;
        self.eval.validate()?;
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::Config(format!("infer.gate must lie in [0, 1], got {}", self.gate)));
        }
        if self.ablate_threads == 0 {
            return Err(Error::Config("ablate.threads must be >= 1".into()));
        }
        if !(self.ablate_lr_multiplier > 0.0) {
            return Err(Error::Config("ablate.lr_multiplier must be positive".into()));
        }
        SuppressorRegistry::with_builtins().build(&self.nms_method, &self.nms)?;
        let train_ids = self.world.scene_id_offset..self.world.scene_id_offset + self.world.num_scenes as u64;
        let eval_ids = self.eval_scene_offset..self.eval_scene_offset + self.eval_num_scenes as u64;
        if train_ids.start < eval_ids.end && eval_ids.start < train_ids.end {
            return Err(Error::Config(format!(
                "evaluation scenes {eval_ids:?} overlap training scenes {train_ids:?}"
            )));
        }
        Ok(())
    }

    /// Held-out split: the training world with its own scene-id range.
    pub fn eval_world(&self) -> WorldConfig {
        WorldConfig {
            num_scenes: self.eval_num_scenes,
            scene_id_offset: self.eval_scene_offset,
            ..self.world.clone()
        }
    }

    /// Epoch whose regression gain the evaluation split uses: the last trained one.
    pub fn eval_epoch(&self) -> usize {
        self.optim.epochs.saturating_sub(1)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        self.world.echo(&mut kv);
        self.model.echo(&mut kv);
        self.optim.echo(&mut kv);
        self.eval.echo(&mut kv);
        kv.insert("train.feature_mode", self.feature_mode_train);
        kv.insert("infer.feature_mode", self.feature_mode_infer);
        kv.insert("infer.gate", self.gate);
        kv.insert("infer.fusion", self.fusion);
        kv.insert("infer.fuse_mode", self.fuse_mode);
        kv.insert("nms.method", &self.nms_method);
        kv.insert("nms.lambda", self.nms.lambda);
        kv.insert("nms.nt", self.nms.nt);
        kv.insert("nms.sigma", self.nms.sigma);
        kv.insert("nms.score_floor", self.nms.score_floor);
        kv.insert("eval.num_scenes", self.eval_num_scenes);
        kv.insert("eval.scene_offset", self.eval_scene_offset);
        kv.insert("ablate.lr_multiplier", self.ablate_lr_multiplier);
        kv.insert("ablate.threads", self.ablate_threads);
        kv.insert("data.epoch", self.data_epoch);
        kv.insert("output.dir", self.output_dir.display());
        kv
    }

    /// Every key with its effective value, sorted.
    pub fn canonical(&self) -> String {
        self.to_kv().to_text()
    }

    /// Hash of the canonical text. `output.dir` and `ablate.threads` are blanked: neither
    /// changes any result.
    pub fn hash(&self) -> String {
        let mut kv = self.to_kv();
        kv.insert("output.dir", "");
        kv.insert("ablate.threads", "");
        kv.hash()
    }

    /// `<output.dir>/<hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.hash())
    }

    /// `<stem>-s<seed>-<hash>.<ext>`
    pub fn file_name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}-s{}-{}.{ext}", self.world.seed, self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::parse(
            "world.num_scenes = 10\nmodel.variant = direct\noptim.lr_multiplier = 3\ninfer.fusion = cls-only\n\
             train.feature_mode = foresight\nnms.method = soft-linear\n",
        )
        .unwrap();
        assert_eq!(cfg.world.num_scenes, 10);
        assert_eq!(cfg.model.variant, crate::regressor::Variant::DirectIoU);
        assert_eq!(cfg.optim.lr_multiplier, 3.0);
        assert_eq!(cfg.fusion, FusionRule::ClsOnly);
        assert_eq!(cfg.feature_mode_train, FeatureMode::Foresight);
        assert_eq!(cfg.nms_method, "soft-linear");
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "world.unknown = 1\n",
            "nms.method = matrix\n",
            "infer.fusion = median\n",
            "world.num_scenes = many\n",
            "infer.gate = 2\n",
            "eval.scene_offset = 0\n",
            "world.object_size_max = 500\n",
            "eval.iou_thresholds = 0.7, 0.5\n",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn output_dir_does_not_change_hash() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert!(a.file_name("report", "json").starts_with("report-s42-"));
    }
}
