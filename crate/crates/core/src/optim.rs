//! AdamW: Adam with decoupled weight decay.
//!
//! Each step first shrinks the parameters, `θ ← θ − lr·λ·θ`, then applies
//! the bias-corrected adaptive update `θ ← θ − lr·m̂/(√v̂ + ε)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::loss::GradientSet;
use crate::math;
use crate::model::HeadModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates, one pair of tensors per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let first: Vec<Vec<f64>> = shapes.into_iter().map(|n| vec![0.0; n]).collect();
        OptimizerState {
            step: 0,
            second: first.clone(),
            first,
        }
    }

    pub fn for_model(model: &HeadModel) -> Self {
        OptimizerState::new(model.parameters().iter().map(|p| p.values.len()))
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.second[i]
    }
}

/// One AdamW update over parallel lists of parameter and gradient tensors.
/// Tensors whose `trainable` flag is false are left untouched.
pub fn adamw_step(
    params: &mut [(&mut [f64], bool)],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    config: &AdamWConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grads.len(),
        });
    }
    for (i, ((p, _), g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[i].len() {
            return Err(Error::DimensionMismatch {
                context: alloc::format!("parameter tensor {i}"),
                expected: p.len(),
                found: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - math::powf(config.beta1, t);
    let bc2 = 1.0 - math::powf(config.beta2, t);
    let lr = config.learning_rate;
    let decay = 1.0 - lr * config.weight_decay;

    for (i, ((p, trainable), g)) in params.iter_mut().zip(grads).enumerate() {
        if !*trainable {
            continue;
        }
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for j in 0..p.len() {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] = p[j] * decay - lr * m_hat / (math::sqrt(v_hat) + config.epsilon);
        }
    }
    Ok(())
}

/// AdamW over every trainable parameter of `model`.
pub fn step_model(
    model: &mut HeadModel,
    grads: &GradientSet,
    state: &mut OptimizerState,
    config: &AdamWConfig,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    let grad_slices: Vec<&[f64]> = grad_tensors.iter().map(|g| g.values).collect();
    let mut params: Vec<(&mut [f64], bool)> = model
        .parameters_mut()
        .into_iter()
        .map(|p| (p.values, p.trainable))
        .collect();
    adamw_step(&mut params, &grad_slices, state, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(theta: &mut Vec<f64>, grad: &[f64], state: &mut OptimizerState, cfg: &AdamWConfig) {
        let mut params = [(theta.as_mut_slice(), true)];
        adamw_step(&mut params, &[grad], state, cfg).unwrap();
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            learning_rate: 1e-2,
            ..AdamWConfig::default()
        };
        let mut theta = vec![0.5, -3.0];
        let mut state = OptimizerState::new([2]);
        run(&mut theta, &[0.0, 0.0], &mut state, &cfg);
        assert_eq!(theta, vec![0.5, -3.0]);
    }

    #[test]
    fn zero_gradient_decays() {
        let cfg = AdamWConfig {
            weight_decay: 0.1,
            learning_rate: 1e-2,
            ..AdamWConfig::default()
        };
        let mut theta = vec![0.5, -3.0];
        let mut state = OptimizerState::new([2]);
        run(&mut theta, &[0.0, 0.0], &mut state, &cfg);
        assert_eq!(theta, vec![0.5 * (1.0 - 1e-3), -3.0 * (1.0 - 1e-3)]);
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            learning_rate: 1e-3,
            ..AdamWConfig::default()
        };
        let mut theta = vec![1.0, 1.0, 1.0];
        let g = [0.3, -2.0, 1e-2];
        let mut state = OptimizerState::new([3]);
        run(&mut theta, &g, &mut state, &cfg);
        for (t, g) in theta.iter().zip(g) {
            let expected = 1.0 - 1e-3 * g.signum();
            assert!((t - expected).abs() <= 1e-6, "{t} vs {expected}");
        }
    }

    #[test]
    fn frozen_tensor_untouched_and_bad_grad_rejected() {
        let cfg = AdamWConfig::default();
        let mut a = vec![1.0];
        let mut b = vec![2.0];
        let mut state = OptimizerState::new([1, 1]);
        {
            let mut params = [(a.as_mut_slice(), true), (b.as_mut_slice(), false)];
            adamw_step(&mut params, &[&[1.0], &[1.0]], &mut state, &cfg).unwrap();
        }
        assert_ne!(a, vec![1.0]);
        assert_eq!(b, vec![2.0]);
        let mut params = [(a.as_mut_slice(), true), (b.as_mut_slice(), false)];
        assert_eq!(
            adamw_step(&mut params, &[&[f64::NAN], &[0.0]], &mut state, &cfg),
            Err(Error::NonFinite("gradient"))
        );
    }
}
