//! Deterministic mini-batch training with AdamW and early stopping on
//! validation macro-accuracy.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::{class_frequencies, Dataset, Sample, Split};
use crate::loss::{self, ClassWeightScheme, ClassWeights};
use crate::metrics::{macro_metrics, EvalReport};
use crate::model::{
    self, Aggregation, Head, HeadKind, HeadModel, InitMode, ModelSpec, ProjectionKind,
    DEFAULT_BASELINE_HIDDEN, DEFAULT_COS_SCALE, DEFAULT_MLP_HIDDEN,
};
use crate::optim::{self, AdamWConfig, OptimizerState};
use crate::rng::{self, Stream};
use crate::{Error, Result};

string_enum!(Weighting { None => "none", Alpha => "alpha", Inverse => "inverse" });

/// Every knob of a training run. Serialized as a flat key-value object.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub head: HeadKind,
    pub aggregation: Aggregation,
    pub projection: ProjectionKind,
    /// Projection output width; `None` keeps the input width.
    pub projected_dim: Option<usize>,
    pub projection_hidden: usize,
    /// Hidden width of the baseline MLP head; 0 gives a single linear layer.
    pub baseline_hidden: usize,
    pub k: usize,
    pub weighting: Weighting,
    pub alpha: f64,
    pub init: InitMode,
    pub cos_scale: f64,
    pub normalize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 8,
            max_epochs: 100,
            patience: 10,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
            head: HeadKind::ProtoSed,
            aggregation: Aggregation::MeanSim,
            projection: ProjectionKind::Linear,
            projected_dim: None,
            projection_hidden: DEFAULT_MLP_HIDDEN,
            baseline_hidden: DEFAULT_BASELINE_HIDDEN,
            k: 3,
            weighting: Weighting::Inverse,
            alpha: 0.5,
            init: InitMode::ClassKmeans,
            cos_scale: DEFAULT_COS_SCALE,
            normalize_inputs: false,
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset for synthetic data: a larger step size, since no
    /// pretrained encoder needs protecting.
    pub fn synthetic_preset() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("epsilon must be positive and weight_decay non-negative");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.k == 0 {
            return bad("k must be >= 1");
        }
        if !(self.cos_scale.is_finite()) {
            return bad("cos_scale must be finite");
        }
        Ok(())
    }

    pub fn scheme(&self) -> ClassWeightScheme {
        match self.weighting {
            Weighting::None => ClassWeightScheme::None,
            Weighting::Alpha => ClassWeightScheme::Alpha(self.alpha),
            Weighting::Inverse => ClassWeightScheme::Inverse,
        }
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn model_spec(&self, input_dim: usize, levels: usize) -> ModelSpec {
        ModelSpec {
            input_dim,
            levels,
            projection: self.projection,
            projected_dim: self.projected_dim.unwrap_or(input_dim),
            projection_hidden: self.projection_hidden,
            head: self.head,
            aggregation: self.aggregation,
            prototypes_per_level: self.k,
            cos_scale: self.cos_scale,
            baseline_hidden: self.baseline_hidden,
            normalize_input: self.normalize_inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean weighted loss over the epoch's mini-batches.
    pub train_loss: f64,
    pub valid_macro_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    /// Mean weighted loss on the training split before the first update.
    pub initial_train_loss: f64,
    /// Mean weighted loss of the returned model on the training split.
    pub final_train_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the returned model: highest validation macro-accuracy,
    /// earliest on ties.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Copies `source`'s projection into `target` and re-places prototypes with
/// class-wise k-means on the warm projection. Baseline heads keep their
/// fresh initialization.
pub fn warm_start(
    mut target: HeadModel,
    source: &HeadModel,
    train: &[Sample],
    k: usize,
    seed: u64,
) -> Result<HeadModel> {
    let (src, dst) = (&source.projection, &target.projection);
    let same_shape = src.kind() == dst.kind()
        && src.input_dim() == dst.input_dim()
        && src.output_dim() == dst.output_dim()
        && src.shape() == dst.shape();
    if !same_shape {
        return Err(Error::IncompatibleModel(format!(
            "warm-start projection {} does not match target projection {}",
            src.shape(),
            dst.shape()
        )));
    }
    target.projection = source.projection.clone();
    target.normalize_input = source.normalize_input;
    if matches!(target.head, Head::Prototypical(_)) {
        let bank = model::init_prototypes(train, &target, k, InitMode::ClassKmeans, seed)?;
        if let Head::Prototypical(p) = &mut target.head {
            p.set_prototypes(bank)?;
        }
    }
    Ok(target)
}

pub fn predict_all(model: &HeadModel, samples: &[Sample]) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| Ok(model::predict(&model.forward(&s.input)?)))
        .collect()
}

fn macro_accuracy(model: &HeadModel, samples: &[Sample]) -> Result<f64> {
    let preds = predict_all(model, samples)?;
    let truths: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok(macro_metrics(&preds, &truths)?.acc_macro)
}

/// Predictions and full report for one split of `dataset`.
pub fn evaluate(model: &HeadModel, dataset: &Dataset, split: Split) -> Result<(Vec<usize>, EvalReport)> {
    if dataset.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            context: "model input vs dataset".into(),
            expected: model.input_dim,
            found: dataset.dim(),
        });
    }
    if dataset.levels() != model.levels {
        return Err(Error::DimensionMismatch {
            context: "model levels vs dataset levels".into(),
            expected: model.levels,
            found: dataset.levels(),
        });
    }
    let samples = dataset.samples(split)?;
    if samples.is_empty() {
        return Err(Error::EmptySplit(split));
    }
    let preds = predict_all(model, &samples)?;
    let truths: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let groups: Vec<Option<&str>> = dataset.split(split).map(|r| r.group.as_deref()).collect();
    let report = EvalReport::compute(&preds, &truths, &groups, model.levels)?;
    Ok((preds, report))
}

/// Class weights for `config` from the training split's level counts.
pub fn class_weights(config: &TrainConfig, dataset: &Dataset) -> Result<ClassWeights> {
    let counts = class_frequencies(dataset, Split::Train)?.counts;
    config.scheme().weights(&counts)
}

/// Trains a model and returns the best-validation checkpoint.
///
/// Each epoch visits the training split in a seeded permutation, keeping the
/// final partial batch. Training stops after `patience` consecutive epochs
/// without a strict improvement in validation macro-accuracy (the first
/// such epoch when `patience` is 0), or at `max_epochs`.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
    warm: Option<&HeadModel>,
) -> Result<(HeadModel, TrainHistory)> {
    config.validate()?;
    let train = dataset.samples(Split::Train)?;
    let valid = dataset.samples(Split::Valid)?;
    if train.is_empty() {
        return Err(Error::EmptySplit(Split::Train));
    }
    if valid.is_empty() {
        return Err(Error::EmptySplit(Split::Valid));
    }
    let weights = class_weights(config, dataset)?;

    let spec = config.model_spec(dataset.dim(), dataset.levels());
    let mut model = HeadModel::new(&spec, config.seed)?;
    if let Some(source) = warm {
        model = warm_start(model, source, &train, config.k, config.seed)?;
    } else if config.init == InitMode::ClassKmeans {
        if let Head::Prototypical(_) = model.head {
            let bank = model::init_prototypes(&train, &model, config.k, InitMode::ClassKmeans, config.seed)?;
            if let Head::Prototypical(p) = &mut model.head {
                p.set_prototypes(bank)?;
            }
        }
    }

    let opt = config.optimizer();
    let mut state = OptimizerState::for_model(&model);
    let mut shuffle_rng = rng::stream(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let initial_train_loss = loss::mean_loss(&model, &train, &weights)?;
    let mut best_model = model.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = loss::loss_and_grads(&model, &batch, &weights)?;
            optim::step_model(&mut model, &grads, &mut state, &opt)?;
            loss_sum += loss * batch.len() as f64;
        }
        let valid_macro_acc = macro_accuracy(&model, &valid)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            valid_macro_acc,
        });
        if valid_macro_acc > best_acc {
            best_acc = valid_macro_acc;
            best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience.max(1) {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }

    let final_train_loss = loss::mean_loss(&best_model, &train, &weights)?;
    Ok((
        best_model,
        TrainHistory {
            initial_train_loss,
            final_train_loss,
            epochs,
            best_epoch,
            stopped_early,
        },
    ))
}
