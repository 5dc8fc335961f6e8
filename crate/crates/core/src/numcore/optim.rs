use serde::{Deserialize, Serialize};

use super::{NumError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient; `l2 * param` is added to the gradient of decayed params.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 0.0,
        }
    }
}

/// Adam moments for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    decay: Vec<bool>,
    step: u64,
}

impl OptimizerState {
    /// `decay[i]` selects which parameters receive the L2 term (weights, not biases).
    pub fn new(config: AdamConfig, params: &[Tensor], decay: Vec<bool>) -> Self {
        assert_eq!(params.len(), decay.len());
        Self {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            decay,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut OptimizerState) -> Result<(), NumError> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(NumError::ParamCount {
            expected: state.m.len(),
            got: params.len().min(grads.len()),
        });
    }
    for (p, g) in params.iter().zip(grads) {
        if !p.same_shape(g) {
            return Err(NumError::ShapeMismatch {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
        l2,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let lam = if state.decay[i] { l2 } else { 0.0 };
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (w, &dg)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let grad = dg + lam * *w;
            m[j] = beta1 * m[j] + (1.0 - beta1) * grad;
            v[j] = beta2 * v[j] + (1.0 - beta2) * grad * grad;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            *w -= learning_rate * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales gradients in place so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(l2: f64) -> OptimizerState {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            l2,
            ..AdamConfig::default()
        };
        OptimizerState::new(cfg, &[Tensor::scalar(0.0)], vec![true])
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = scalar_state(0.0);
        let mut p = vec![Tensor::scalar(1.5)];
        adam_step(&mut p, &[Tensor::scalar(0.0)], &mut state).unwrap();
        assert_eq!(p[0].data()[0], 1.5);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn positive_gradient_decreases_param() {
        let mut state = scalar_state(0.0);
        let mut p = vec![Tensor::scalar(0.0)];
        let mut prev = 0.0;
        for _ in 0..20 {
            adam_step(&mut p, &[Tensor::scalar(1.0)], &mut state).unwrap();
            assert!(p[0].data()[0] < prev);
            prev = p[0].data()[0];
        }
    }

    #[test]
    fn weight_decay_shrinks_toward_zero() {
        for start in [2.0, -2.0] {
            let mut state = scalar_state(0.1);
            let mut p = vec![Tensor::scalar(start)];
            let mut prev = f64::abs(start);
            for _ in 0..50 {
                adam_step(&mut p, &[Tensor::scalar(0.0)], &mut state).unwrap();
                let mag = p[0].data()[0].abs();
                assert!(mag < prev);
                prev = mag;
            }
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut state = scalar_state(0.0);
        let mut p = vec![Tensor::scalar(0.0)];
        let g = Tensor::matrix(1, 2, vec![0.0; 2]).unwrap();
        assert!(adam_step(&mut p, &[g], &mut state).is_err());
    }
}
