use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tasks::Task;
use crate::datasets::AugmentConfig;
use crate::error::{Error, Result};
use crate::lane::PipelineConfig;
use crate::nn::OptimizerKind;

/// Training hyperparameters. Unset values fall back to the per-task
/// defaults in [`TrainConfig::for_task`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    /// Stop once the validation score reaches this value: accuracy for the
    /// classifiers, mean IoU for segmentation. Ignored for steering.
    pub target_score: Option<f64>,
    /// Apply random augmentation to training samples each epoch.
    pub augment: Option<bool>,
}

impl TrainConfig {
    /// Defaults: 20 epochs / batch 64 / lr 0.001 for classifiers, 50 epochs
    /// for steering regression, batch 8 for the segmenter. All use Adam.
    pub fn for_task(task: Task) -> Self {
        let (epochs, batch) = match task {
            Task::Signs | Task::Vehicles => (20, 64),
            Task::Clone => (50, 64),
            Task::Segment => (20, 8),
        };
        Self {
            epochs: Some(epochs),
            batch_size: Some(batch),
            learning_rate: Some(0.001),
            optimizer: Some(OptimizerKind::Adam),
            target_score: None,
            augment: Some(task == Task::Clone),
        }
    }

    /// Fill unset fields from `defaults`.
    pub fn or(self, defaults: TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.or(defaults.epochs),
            batch_size: self.batch_size.or(defaults.batch_size),
            learning_rate: self.learning_rate.or(defaults.learning_rate),
            optimizer: self.optimizer.or(defaults.optimizer),
            target_score: self.target_score.or(defaults.target_score),
            augment: self.augment.or(defaults.augment),
        }
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(1)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(1)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(0.001)
    }

    pub fn optimizer(&self) -> OptimizerKind {
        self.optimizer.unwrap_or(OptimizerKind::Adam)
    }

    pub fn augment(&self) -> bool {
        self.augment.unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == Some(0) || self.batch_size == Some(0) {
            return Err(Error::Config("epochs and batch_size must be ≥ 1".into()));
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.target_score.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::Config("target_score must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Fraction of the data used for training; the rest is the test split.
    pub train_ratio: f64,
    pub split_seed: u64,
    /// Fraction of the training split held out to monitor `target_score`.
    pub validation_ratio: f64,
    /// Driving log file name inside the data directory.
    pub driving_log: String,
    /// Image directory inside the data directory for driving frames.
    pub driving_images: String,
    /// Also train on the left/right cameras with steering correction.
    pub side_cameras: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            split_seed: 0,
            validation_ratio: 0.0,
            driving_log: "driving_log.csv".into(),
            driving_images: "IMG".into(),
            side_cameras: true,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_ratio > 0.0 && self.train_ratio <= 1.0) {
            return Err(Error::Config(format!("train_ratio must be in (0, 1], got {}", self.train_ratio)));
        }
        if !(0.0..1.0).contains(&self.validation_ratio) {
            return Err(Error::Config(format!(
                "validation_ratio must be in [0, 1), got {}",
                self.validation_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub data: DataConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults, overlaid by `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate().map_err(|e| Error::Config(format!("[pipeline] {e}")))?;
        self.train.validate()?;
        self.augment.validate()?;
        self.data.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are TOML-representable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let mut cfg = Config::default();
        cfg.train = TrainConfig::for_task(Task::Signs);
        let text = cfg.to_toml();
        assert!(text.contains("[pipeline]") && text.contains("[train]") && text.contains("[augment]"));
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in ["[train]\nepochz = 3\n", "[pipline]\n", "[pipeline]\nblur = 3\n", "top = 1\n"] {
            assert!(matches!(Config::from_toml(bad), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = Config::from_toml("[pipeline]\ncanny_low = 40.0\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.pipeline.canny_low, 40.0);
        assert_eq!(cfg.pipeline.canny_high, PipelineConfig::default().canny_high);
        let t = cfg.train.or(TrainConfig::for_task(Task::Clone));
        assert_eq!((t.epochs, t.batch_size, t.learning_rate), (Some(3), Some(64), Some(0.001)));
    }

    #[test]
    fn task_defaults() {
        let s = TrainConfig::for_task(Task::Signs);
        assert_eq!((s.epochs(), s.batch_size(), s.learning_rate()), (20, 64, 0.001));
        let c = TrainConfig::for_task(Task::Clone);
        assert_eq!((c.epochs(), c.batch_size(), c.learning_rate()), (50, 64, 0.001));
    }

    #[test]
    fn invalid_values() {
        assert!(Config::from_toml("[pipeline]\ncanny_low = 500.0\n").is_err());
        assert!(Config::from_toml("[train]\nepochs = 0\n").is_err());
        assert!(Config::from_toml("[data]\ntrain_ratio = 1.5\n").is_err());
        assert!(Config::from_toml("[train]\noptimizer = \"lbfgs\"\n").is_err());
    }
}
