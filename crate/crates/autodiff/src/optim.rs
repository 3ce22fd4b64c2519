//! RMSProp, with the squared-gradient average kept outside the root.

use serde::{Deserialize, Serialize};

use crate::{AutodiffError, ParamSet, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 4e-4,
            alpha: 0.99,
            eps: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    square_avg: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &ParamSet) -> Self {
        Self {
            config,
            square_avg: params
                .tensors()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn square_avg(&self) -> &[Tensor] {
        &self.square_avg
    }

    /// `v ← αv + (1−α)g²; p ← p − lr·g/(√v + ε)`.
    ///
    /// Non-finite gradients abort the step before anything is modified.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<(), AutodiffError> {
        if grads.len() != params.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "rmsprop_step",
                left: (params.len(), 1),
                right: (grads.len(), 1),
            });
        }
        for (i, (g, (name, p))) in grads.iter().zip(params.iter()).enumerate() {
            if g.shape() != p.shape() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "rmsprop_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
            if !g.is_finite() {
                return Err(AutodiffError::NonFiniteGradient {
                    name: name.to_string(),
                    index: i,
                });
            }
        }
        let RmsPropConfig { lr, alpha, eps } = self.config;
        for (i, g) in grads.iter().enumerate() {
            let v = self.square_avg[i].data_mut();
            let p = params.tensor_mut(i).data_mut();
            for ((pk, vk), &gk) in p.iter_mut().zip(v.iter_mut()).zip(g.data()) {
                *vk = alpha * *vk + (1.0 - alpha) * gk * gk;
                *pk -= lr * gk / (vk.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_set(p: f64) -> ParamSet {
        let mut s = ParamSet::new();
        s.add("p", Tensor::scalar(p));
        s
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = scalar_set(1.25);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &params);
        for _ in 0..5 {
            opt.step(&mut params, &[Tensor::scalar(0.0)]).unwrap();
        }
        assert_eq!(params.flatten(), vec![1.25]);
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut params = scalar_set(-3.0);
        let cfg = RmsPropConfig { lr: 0.0, ..Default::default() };
        let mut opt = RmsProp::new(cfg, &params);
        opt.step(&mut params, &[Tensor::scalar(2.5)]).unwrap();
        assert_eq!(params.flatten(), vec![-3.0]);
    }

    #[test]
    fn single_step_matches_direct_formula() {
        let mut params = scalar_set(0.0);
        let cfg = RmsPropConfig { lr: 0.1, alpha: 0.99, eps: 1e-5 };
        let mut opt = RmsProp::new(cfg, &params);
        opt.step(&mut params, &[Tensor::scalar(1.0)]).unwrap();
        // v = 0.99·0 + (1 − 0.99)·1 ≈ 0.01, p = 0 − 0.1·1/(√v + 1e-5)
        let v = 0.99 * 0.0 + (1.0 - 0.99) * 1.0;
        let expected = -0.1 / (f64::sqrt(v) + 1e-5);
        assert_eq!(opt.square_avg()[0].item(), Some(v));
        assert!((v - 0.01).abs() < 1e-15);
        assert!((params.flatten()[0] - expected).abs() < 1e-15);
        assert!((expected - (-0.999_900_009_999)).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_aborts_without_update() {
        let mut params = scalar_set(0.5);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &params);
        let err = opt.step(&mut params, &[Tensor::scalar(f64::NAN)]).unwrap_err();
        assert!(matches!(err, AutodiffError::NonFiniteGradient { .. }));
        assert_eq!(params.flatten(), vec![0.5]);
        assert_eq!(opt.square_avg()[0].item(), Some(0.0));
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![Tensor::row_vector(vec![3.0, 4.0])];
        let before = clip_grad_norm(&mut g, 1.0);
        assert_eq!(before, 5.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
    }
}
