//! Class re-weighting and weighted cross-entropy with exact gradients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Sample;
use crate::math;
use crate::model::{Distribution, HeadModel, ParamView};
use crate::{Error, Result};

/// Lower bound applied to the true-level probability inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeightScheme {
    None,
    /// Frequency-smoothed weights `q_i = p_i^α / Σ_j p_j^α · 1/p_i`.
    Alpha(f64),
    /// Inverse frequency `q_i = Σ_j n_j / n_i`.
    Inverse,
}

impl ClassWeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ClassWeightScheme::None => "none",
            ClassWeightScheme::Alpha(_) => "alpha",
            ClassWeightScheme::Inverse => "inverse",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            ClassWeightScheme::Alpha(a) => Some(*a),
            _ => None,
        }
    }

    /// Weights for the given per-level training counts.
    pub fn weights(&self, counts: &[usize]) -> Result<ClassWeights> {
        match *self {
            ClassWeightScheme::None => Ok(ClassWeights::uniform(counts.len())),
            ClassWeightScheme::Alpha(alpha) => {
                let total: usize = counts.iter().sum();
                if total == 0 {
                    return Err(Error::Empty("class counts"));
                }
                let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
                weights_alpha(&freqs, alpha)
            }
            ClassWeightScheme::Inverse => weights_inverse(counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    weights: Vec<f64>,
}

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("class weights"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("class weights must be finite and positive".into()));
        }
        Ok(ClassWeights { weights })
    }

    pub fn uniform(levels: usize) -> Self {
        ClassWeights {
            weights: vec![1.0; levels],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `q_i = (p_i^α / Σ_j p_j^α) · (1 / p_i)` over normalized frequencies.
pub fn weights_alpha(frequencies: &[f64], alpha: f64) -> Result<ClassWeights> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    if let Some(level) = frequencies.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::ZeroFrequency { level });
    }
    let powered: Vec<f64> = frequencies.iter().map(|&p| math::powf(p, alpha)).collect();
    let norm: f64 = powered.iter().sum();
    ClassWeights::new(
        powered
            .iter()
            .zip(frequencies)
            .map(|(pa, p)| pa / norm / p)
            .collect(),
    )
}

/// `q̂_i = Σ_j n_j / n_i` over raw counts.
pub fn weights_inverse(counts: &[usize]) -> Result<ClassWeights> {
    if let Some(level) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroFrequency { level });
    }
    let total: usize = counts.iter().sum();
    ClassWeights::new(counts.iter().map(|&c| total as f64 / c as f64).collect())
}

/// `−w[label] · ln(max(p[label], PROB_FLOOR))`
pub fn weighted_ce(dist: &Distribution, label: usize, weights: &ClassWeights) -> Result<f64> {
    if label >= dist.len() {
        return Err(Error::LabelOutOfRange {
            label,
            levels: dist.len(),
        });
    }
    if weights.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            context: "class weights".into(),
            expected: dist.len(),
            found: weights.len(),
        });
    }
    let p = dist.probs()[label].max(PROB_FLOOR);
    Ok(-weights.as_slice()[label] * math::ln(p))
}

/// Gradients shaped exactly like the model they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    inner: HeadModel,
}

impl GradientSet {
    pub fn zeros_like(model: &HeadModel) -> Self {
        GradientSet {
            inner: model.zeroed(),
        }
    }

    /// Gradient tensors in [`HeadModel::parameters`] order.
    pub fn tensors(&self) -> Vec<ParamView<'_>> {
        self.inner.parameters()
    }

    pub fn get(&self, name: &str) -> Option<Vec<f64>> {
        self.tensors()
            .into_iter()
            .find(|p| p.name == name)
            .map(|p| p.values.to_vec())
    }

    fn scale(&mut self, factor: f64) {
        for p in self.inner.parameters_mut() {
            p.values.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Mean weighted cross-entropy over `batch` and its exact gradient with
/// respect to every parameter of `model`.
///
/// Per-record contributions are accumulated in batch order.
pub fn loss_and_grads(
    model: &HeadModel,
    batch: &[&Sample],
    weights: &ClassWeights,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if weights.len() != model.levels {
        return Err(Error::DimensionMismatch {
            context: "class weights".into(),
            expected: model.levels,
            found: weights.len(),
        });
    }
    let mut grads = GradientSet::zeros_like(model);
    let mut total = 0.0;
    let mut dlogits = vec![0.0; model.levels];
    for sample in batch {
        let trace = model.trace(&sample.input)?;
        total += weighted_ce(&trace.dist, sample.label, weights)?;
        let w = weights.as_slice()[sample.label];
        for (j, (g, p)) in dlogits.iter_mut().zip(trace.dist.probs()).enumerate() {
            *g = w * (p - if j == sample.label { 1.0 } else { 0.0 });
        }
        model.backward(&trace, &dlogits, &mut grads.inner);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    let loss = total / n;
    if !loss.is_finite() || grads.tensors().iter().any(|t| t.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("loss or gradient"));
    }
    Ok((loss, grads))
}

/// Mean weighted cross-entropy without gradients.
pub fn mean_loss(model: &HeadModel, samples: &[Sample], weights: &ClassWeights) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let mut total = 0.0;
    for s in samples {
        total += weighted_ce(&model.forward(&s.input)?, s.label, weights)?;
    }
    Ok(total / samples.len() as f64)
}
