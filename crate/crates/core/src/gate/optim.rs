// SPDX-License-Identifier: Apache-2.0
//! Adam with global-norm gradient clipping and decoupled weight decay.

use super::model::Parameters;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    /// Maximum global L2 norm of the gradient.
    pub gradient_clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 5e-4,
            gradient_clip: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Parameters<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub norm_before_clip: f64,
    pub norm_after_clip: f64,
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns `(norm_before, norm_after)`.
pub fn clip_global_norm<T: Scalar>(grads: &mut Parameters<T>, max_norm: f64) -> Result<(f64, f64)> {
    let norm = grads.squared_norm().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFiniteGradient(format!("gradient norm is {norm}")));
    }
    if norm <= max_norm {
        return Ok((norm, norm));
    }
    let scale = T::from_f64_lossy(max_norm / norm);
    for t in grads.tensors_mut() {
        for g in t.iter_mut() {
            *g *= scale;
        }
    }
    Ok((norm, grads.squared_norm().sqrt()))
}

/// Clips, then applies one Adam update with decoupled weight decay:
/// `p -= lr * (m̂ / (sqrt(v̂) + ε) + wd * p)`.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &mut Parameters<T>,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<StepReport> {
    let (norm_before_clip, norm_after_clip) = clip_global_norm(grads, config.gradient_clip)?;
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64_lossy(config.beta1);
    let b2 = T::from_f64_lossy(config.beta2);
    let one = T::one();
    let bias1 = T::from_f64_lossy(1.0 - config.beta1.powi(t));
    let bias2 = T::from_f64_lossy(1.0 - config.beta2.powi(t));
    let lr = T::from_f64_lossy(config.learning_rate);
    let wd = T::from_f64_lossy(config.weight_decay);
    let eps = T::from_f64_lossy(config.epsilon);

    let ps = params.tensors_mut();
    let gs = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (one - b1) * gk;
            v[k] = b2 * v[k] + (one - b2) * gk * gk;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            p[k] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * p[k]);
        }
    }
    Ok(StepReport {
        norm_before_clip,
        norm_after_clip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::layer::{AttentionLayer, LayerParams};
    use crate::gate::matrix::Matrix;

    fn single(value: f64) -> Parameters<f64> {
        Parameters {
            encoder: vec![AttentionLayer {
                heads: vec![LayerParams {
                    w: Matrix::from_vec(1, 1, vec![value]).unwrap(),
                    v_self: vec![],
                    v_neighbor: vec![],
                }],
            }],
            decoder: vec![],
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = single(0.5);
        let mut g = single(0.0);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for _ in 0..3 {
            adam_step(&mut p, &mut g, &mut s, &cfg).unwrap();
        }
        assert_eq!(p, single(0.5));
        assert_eq!(s.t, 3);
    }

    #[test]
    fn clipping_scales_by_ratio() {
        // norm 50 -> scaled by 0.1
        let mut g = Parameters {
            encoder: vec![AttentionLayer {
                heads: vec![LayerParams {
                    w: Matrix::from_vec(1, 2, vec![30.0, 40.0]).unwrap(),
                    v_self: vec![],
                    v_neighbor: vec![],
                }],
            }],
            decoder: vec![],
        };
        let (before, after) = clip_global_norm(&mut g, 5.0).unwrap();
        assert_eq!(before, 50.0);
        assert!((after - 5.0).abs() < 1e-12);
        let w: &[f64] = g.encoder[0].heads[0].w.as_slice();
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        let mut p = single(0.5);
        let mut g = single(1.0);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        adam_step(&mut p, &mut g, &mut s, &cfg).unwrap();
        // m = 0.1, v = 0.001; m̂ = 1, v̂ = 1 -> p = 0.5 - 0.01 * 1 / (1 + 1e-8)
        let want = 0.5 - 0.01 * (0.1 / 0.1) / ((0.001f64 / 0.001).sqrt() + 1e-8);
        assert!((p.encoder[0].heads[0].w.get(0, 0) - want).abs() < 1e-15);
        assert!((s.m.encoder[0].heads[0].w.get(0, 0) - 0.1).abs() < 1e-15);
        assert!((s.v.encoder[0].heads[0].w.get(0, 0) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay() {
        let mut p = single(2.0);
        let mut g = single(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &mut g, &mut s, &AdamConfig::default()).unwrap();
        let want = 2.0 - 0.01 * 5e-4 * 2.0;
        assert!((p.encoder[0].heads[0].w.get(0, 0) - want).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = single(1.0);
        let mut g = single(f64::NAN);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &mut g, &mut s, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(_)));
        assert_eq!(p, single(1.0));
    }
}
