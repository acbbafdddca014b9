use std::path::Path;

use super::config::{Config, TrainConfig};
use crate::datasets::{
    augment_classification, load_class_dirs, load_classification, load_seg_pairs, load_segmentation,
    parse_driving_log, preprocess_driving, split_train_test, Camera, SEG_SIZE, SIGN_SIZE, VEHICLE_SIZE,
};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::metrics::{classification_scores, macro_scores, mean_iou, rmse, roc_auc, ConfusionMatrix, ReportRow, RocCurve};
use crate::models::{
    build_behavior_clone_cnn, build_binary_vehicle_cnn, build_mini_fcn_segmenter, build_traffic_sign_cnn_with_classes,
};
use crate::nn::{gather_rows, predict_batched, train_epoch, LossKind, ModelGraph, OptimizerState, Samples};
use crate::rng::Prng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Task {
    /// Traffic-sign classification (class directories).
    Signs,
    /// Steering regression from a driving log.
    Clone,
    /// Road segmentation (images/ and masks/).
    Segment,
    /// Vehicle / non-vehicle classification (class directories 0 and 1).
    Vehicles,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Signs => "signs",
            Task::Clone => "clone",
            Task::Segment => "segment",
            Task::Vehicles => "vehicles",
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            Task::Signs => LossKind::CategoricalCe,
            Task::Clone => LossKind::Mse,
            Task::Segment | Task::Vehicles => LossKind::BinaryCe,
        }
    }

    /// Factory model for this task; `outputs` is the class count for signs.
    pub fn build_model(self, outputs: usize, prng: &mut Prng) -> Result<ModelGraph> {
        match self {
            Task::Signs => build_traffic_sign_cnn_with_classes(outputs, prng),
            Task::Clone => build_behavior_clone_cnn(prng),
            Task::Segment => build_mini_fcn_segmenter(prng),
            Task::Vehicles => build_binary_vehicle_cnn(prng),
        }
    }
}

/// Load every sample of `task` under `dir` in a stable order.
pub fn load_task_data(task: Task, dir: &Path, config: &Config) -> Result<Samples> {
    if !dir.is_dir() {
        return Err(Error::Dataset(format!("data directory {} does not exist", dir.display())));
    }
    match task {
        Task::Signs => {
            let set = load_class_dirs(dir)?;
            let (x, y) = load_classification(&set, SIGN_SIZE, set.class_count)?;
            Samples::new(x, y)
        }
        Task::Vehicles => {
            let set = load_class_dirs(dir)?;
            if set.class_count != 2 {
                return Err(Error::Dataset(format!(
                    "vehicle data needs class directories 0 and 1, found {} classes",
                    set.class_count
                )));
            }
            let (x, onehot) = load_classification(&set, VEHICLE_SIZE, 2)?;
            let n = x.shape()[0];
            let y = (0..n).map(|i| onehot.data()[i * 2 + 1]).collect();
            Samples::new(x, Tensor::new(vec![n, 1], y)?)
        }
        Task::Segment => {
            let set = load_seg_pairs(dir.join("images"), dir.join("masks"))?;
            let (x, y) = load_segmentation(&set, SEG_SIZE)?;
            Samples::new(x, y)
        }
        Task::Clone => {
            let records = parse_driving_log(dir.join(&config.data.driving_log))?;
            if records.is_empty() {
                return Err(Error::Dataset("driving log has no rows".into()));
            }
            let images = dir.join(&config.data.driving_images);
            let images = if images.is_dir() { images } else { dir.to_path_buf() };
            let cameras: &[Camera] = if config.data.side_cameras {
                &[Camera::Center, Camera::Left, Camera::Right]
            } else {
                &[Camera::Center]
            };
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            // augment = false never draws from the generator.
            let mut unused = Prng::new(0);
            for r in &records {
                for &cam in cameras {
                    let (x, s) = preprocess_driving(r, cam, &mut unused, false, &config.augment, Some(&images))?;
                    xs.push(x);
                    ys.push(s);
                }
            }
            log::info!("driving log: {} rows, {} samples", records.len(), xs.len());
            let x = Tensor::stack(&xs.iter().collect::<Vec<_>>())?;
            let n = ys.len();
            Samples::new(x, Tensor::new(vec![n, 1], ys)?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

/// `(train, validation, test)` sample indices from the `[data]` ratios.
pub fn split_indices(n: usize, config: &Config) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..n).collect();
    let d = &config.data;
    let (train, test) = split_train_test(&all, d.train_ratio, d.split_seed)?;
    let (train, val) = if d.validation_ratio > 0.0 {
        split_train_test(&train, 1.0 - d.validation_ratio, d.split_seed.wrapping_add(1))?
    } else {
        (train, Vec::new())
    };
    Ok((train, val, test))
}

pub fn select(data: &Samples, split: Split, config: &Config) -> Result<Samples> {
    let (train, val, test) = split_indices(data.len(), config)?;
    let idx = match split {
        Split::Train => [train, val].concat(),
        Split::Test => test,
        Split::All => (0..data.len()).collect(),
    };
    if idx.is_empty() {
        return Err(Error::Dataset(format!("the {split:?} split is empty")));
    }
    data.gather(&idx)
}

/// Validation score used for early stopping: accuracy for classifiers,
/// mean IoU for segmentation, `None` for steering.
pub fn score(task: Task, model: &ModelGraph, data: &Samples) -> Result<Option<f64>> {
    let pred = predict_batched(model, &data.x, eval_batch(task))?;
    Ok(match task {
        Task::Signs => {
            let (p, t) = (pred.argmax_rows(), data.y.argmax_rows());
            Some(p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64)
        }
        Task::Vehicles => {
            let hits = pred.data().iter().zip(data.y.data()).filter(|(p, y)| (**p > 0.5) == (**y > 0.5)).count();
            Some(hits as f64 / data.len() as f64)
        }
        Task::Segment => Some(mean_iou(&pred, &data.y, 0.5)?),
        Task::Clone => None,
    })
}

fn eval_batch(task: Task) -> usize {
    if task == Task::Segment {
        8
    } else {
        64
    }
}

/// Per-epoch progress: epoch index, mean training loss, validation score.
pub type EpochHook<'a> = &'a mut dyn FnMut(usize, f64, Option<f64>);

/// Train the factory model of `task`. Initialization, shuffling, dropout and
/// augmentation all draw from one generator seeded with `seed`.
pub fn train_task(
    task: Task,
    train: &Samples,
    validation: Option<&Samples>,
    train_cfg: &TrainConfig,
    config: &Config,
    seed: u64,
    on_epoch: EpochHook<'_>,
) -> Result<ModelGraph> {
    let t = train_cfg.clone().or(TrainConfig::for_task(task));
    t.validate()?;
    let mut prng = Prng::new(seed);
    let outputs = train.y.shape()[1..].iter().product();
    let mut model = task.build_model(outputs, &mut prng)?;
    if train.x.shape()[1..] != *model.input_shape() || train.y.shape()[1..] != *model.output_shape() {
        return Err(Error::Dataset(format!(
            "samples {:?} → {:?} do not fit the {} model {:?} → {:?}",
            &train.x.shape()[1..],
            &train.y.shape()[1..],
            task.name(),
            model.input_shape(),
            model.output_shape()
        )));
    }
    let mut opt = OptimizerState::new(t.optimizer(), t.learning_rate());
    for epoch in 0..t.epochs() {
        let epoch_data = if t.augment() {
            augment_samples(task, train, config, &mut prng)?
        } else {
            train.clone()
        };
        let loss = train_epoch(&mut model, &epoch_data, t.batch_size(), task.loss(), &mut opt, &mut prng)?;
        if !loss.is_finite() {
            return Err(Error::param(format!("training diverged at epoch {epoch} (loss {loss})")));
        }
        let val = match validation {
            Some(v) if !v.is_empty() => score(task, &model, v)?,
            _ => None,
        };
        on_epoch(epoch, loss, val);
        if let (Some(target), Some(v)) = (t.target_score, val) {
            if v >= target {
                log::info!("validation score {v:.4} reached target {target} after epoch {epoch}");
                break;
            }
        }
    }
    Ok(model)
}

/// Fresh random augmentation of every training sample: horizontal flips
/// with negated steering for driving frames, the `[augment]` flip / shear /
/// zoom for classifier images. Segmentation samples are left unchanged.
pub fn augment_samples(task: Task, data: &Samples, config: &Config, prng: &mut Prng) -> Result<Samples> {
    let a = &config.augment;
    match task {
        Task::Clone => {
            let n = data.len();
            let mut xs = data.x.unstack();
            let mut y = data.y.clone();
            for (i, x) in xs.iter_mut().enumerate() {
                if prng.bernoulli(a.driving_flip_prob) {
                    *x = x.flip_last_axis();
                    y.data_mut()[i] = -y.data()[i];
                }
            }
            debug_assert_eq!(xs.len(), n);
            Samples::new(Tensor::stack(&xs.iter().collect::<Vec<_>>())?, y)
        }
        Task::Signs | Task::Vehicles if a.flip_prob > 0.0 || a.shear_range > 0.0 || a.zoom_range > 0.0 => {
            let mut xs = Vec::with_capacity(data.len());
            for x in data.x.unstack() {
                let img = Image::from_tensor(&x.scale(255.0))?;
                let out = augment_classification(&img, a, prng)?;
                if (out.width(), out.height()) != (img.width(), img.height()) {
                    return Err(Error::Config("[augment] must preserve the model input size".into()));
                }
                xs.push(out.normalize());
            }
            Samples::new(Tensor::stack(&xs.iter().collect::<Vec<_>>())?, data.y.clone())
        }
        _ => Ok(data.clone()),
    }
}

/// Inference-mode evaluation of `model` on `data`, as one report row plus
/// the ROC curve where one applies.
pub fn evaluate_task(task: Task, model: &ModelGraph, data: &Samples, name: &str) -> Result<(ReportRow, Option<RocCurve>)> {
    if data.x.shape()[1..] != *model.input_shape() || data.y.shape()[1..] != *model.output_shape() {
        return Err(Error::Dataset(format!(
            "data {:?} → {:?} does not fit the checkpoint {:?} → {:?}",
            &data.x.shape()[1..],
            &data.y.shape()[1..],
            model.input_shape(),
            model.output_shape()
        )));
    }
    let pred = predict_batched(model, &data.x, eval_batch(task))?;
    let mut row = ReportRow {
        model: name.to_string(),
        ..Default::default()
    };
    let mut curve = None;
    match task {
        Task::Signs => {
            let k = data.y.shape()[1];
            let (p, t) = (pred.argmax_rows(), data.y.argmax_rows());
            let cm = ConfusionMatrix::from_pairs(k, t.iter().copied().zip(p.iter().copied()))?;
            fill_scores(&mut row, macro_scores(&cm)?);
            row.auc = macro_auc(&pred, &t, k)?;
        }
        Task::Vehicles | Task::Segment => {
            let labels: Vec<bool> = data.y.data().iter().map(|&v| v > 0.5).collect();
            let cm = ConfusionMatrix::from_pairs(
                2,
                labels.iter().zip(pred.data()).map(|(&l, &p)| (l as usize, (p > 0.5) as usize)),
            )?;
            fill_scores(&mut row, classification_scores(&cm, 1)?);
            if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
                let (c, auc) = roc_auc(pred.data(), &labels)?;
                row.auc = Some(auc);
                curve = Some(c);
            } else {
                row.degenerate = true;
            }
            if task == Task::Segment {
                row.mean_iou = Some(mean_iou(&pred, &data.y, 0.5)?);
            }
        }
        Task::Clone => row.rmse = Some(rmse(data.y.data(), pred.data())?),
    }
    Ok((row, curve))
}

fn fill_scores(row: &mut ReportRow, s: crate::metrics::ClassScores) {
    row.accuracy = Some(s.accuracy);
    row.precision = Some(s.precision);
    row.recall = Some(s.recall);
    row.f1 = Some(s.f1);
    row.degenerate |= s.degenerate;
}

/// Mean one-vs-rest AUC over classes that have both positives and negatives.
fn macro_auc(pred: &Tensor, truth: &[usize], k: usize) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut used = 0;
    for c in 0..k {
        let labels: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let scores = gather_rows(&pred.transpose2d()?, &[c])?.into_data();
        sum += roc_auc(&scores, &labels)?.1;
        used += 1;
    }
    Ok((used > 0).then(|| sum / used as f64))
}
