//! First-order optimizers over flat weight buffers.

use std::str::FromStr;

use crate::error::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    AdaGrad,
    RmsProp,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adagrad" => Ok(Self::AdaGrad),
            "rmsprop" => Ok(Self::RmsProp),
            "adam" => Ok(Self::Adam),
            other => Err(Error::invalid(format!(
                "unknown optimizer `{other}` (expected sgd, adagrad, rmsprop or adam)"
            ))),
        }
    }
}

/// Per-weight accumulators. `first` holds Adam's first moment; `second`
/// holds the squared-gradient sum (AdaGrad), running mean (RMSProp) or
/// second moment (Adam).
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, num_weights: usize) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::AdaGrad | OptimizerKind::RmsProp => (Vec::new(), vec![0.0; num_weights]),
            OptimizerKind::Adam => (vec![0.0; num_weights], vec![0.0; num_weights]),
        };
        Self {
            kind,
            first,
            second,
            steps: 0,
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, weights: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(weights.len(), grads.len(), "optimizer shape mismatch");
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in weights.iter_mut().zip(grads) {
                    *w -= lr * g;
                }
            }
            OptimizerKind::AdaGrad => {
                for ((w, g), acc) in weights.iter_mut().zip(grads).zip(&mut self.second) {
                    *acc += g * g;
                    *w -= lr * g / (acc.sqrt() + ADAGRAD_EPS);
                }
            }
            OptimizerKind::RmsProp => {
                for ((w, g), v) in weights.iter_mut().zip(grads).zip(&mut self.second) {
                    *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                    *w -= lr * g / (v.sqrt() + RMSPROP_EPS);
                }
            }
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((w, g), m), v) in weights
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_names() {
        assert_eq!("Adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert_eq!("rmsprop".parse::<OptimizerKind>().unwrap(), OptimizerKind::RmsProp);
        assert!("lbfgs".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut w = vec![0.3, -1.2];
        let mut s = OptimizerState::new(OptimizerKind::Sgd, 2);
        s.step(&mut w, &[0.0, 0.0], 0.5);
        assert_eq!(w, vec![0.3, -1.2]);
        s.step(&mut w, &[1.0, -2.0], 0.5);
        assert_relative_eq!(w[0], -0.2, epsilon = 1e-15);
        assert_relative_eq!(w[1], -0.2, epsilon = 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut w = vec![0.0];
        let mut s = OptimizerState::new(OptimizerKind::Adam, 1);
        s.step(&mut w, &[1.0], 0.001);
        // m_hat = v_hat = 1
        assert_relative_eq!(-w[0], 0.001 / (1.0 + 1e-8), epsilon = 1e-18);
    }

    #[test]
    fn adagrad_steps_shrink_like_inverse_sqrt() {
        let mut w = vec![0.0];
        let mut s = OptimizerState::new(OptimizerKind::AdaGrad, 1);
        let mut prev_w = 0.0;
        let mut prev_step = f64::INFINITY;
        for t in 1..=50 {
            s.step(&mut w, &[2.0], 0.1);
            let step = prev_w - w[0];
            assert!(step < prev_step);
            // accumulator after t steps is 4t, so the step is 0.1·2/(2√t)
            assert_relative_eq!(step, 0.1 / (t as f64).sqrt(), max_relative = 1e-6);
            prev_step = step;
            prev_w = w[0];
        }
    }

    #[test]
    fn rmsprop_first_step() {
        let mut w = vec![1.0];
        let mut s = OptimizerState::new(OptimizerKind::RmsProp, 1);
        s.step(&mut w, &[0.5], 0.01);
        let v: f64 = 0.1 * 0.25;
        assert_relative_eq!(w[0], 1.0 - 0.01 * 0.5 / (v.sqrt() + 1e-8), epsilon = 1e-15);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        clip_global_norm(&mut g, 1.0);
        assert_relative_eq!(g[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.8, epsilon = 1e-15);
    }
}
