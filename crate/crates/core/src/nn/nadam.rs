use alloc::format;
use alloc::vec::Vec;

use super::{NnError, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-7,
        }
    }
}

/// Adam with a Nesterov look-ahead on the first moment.
///
/// At step `t`, for each scalar parameter:
///
/// ```text
/// m  <- b1 m + (1 - b1) g
/// v  <- b2 v + (1 - b2) g^2
/// m^ =  m / (1 - b1^t)            v^ = v / (1 - b2^t)
/// m- =  b1 m^ + (1 - b1) g / (1 - b1^t)
/// p  <- p - lr m- / (sqrt(v^) + eps)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Nadam<T> {
    pub config: NadamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Real> Nadam<T> {
    /// Zeroed moments shaped like `params`.
    pub fn new(config: NadamConfig, params: &[&Tensor<T>]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// Rebuild from saved state; moment lists must pair up shape-wise.
    pub fn from_state(
        config: NadamConfig,
        step: u64,
        first: Vec<Tensor<T>>,
        second: Vec<Tensor<T>>,
    ) -> Result<Self, NnError> {
        if first.len() != second.len()
            || first
                .iter()
                .zip(&second)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(NnError::Shape {
                op: "nadam",
                detail: format!(
                    "{} first moments vs {} second moments",
                    first.len(),
                    second.len()
                ),
            });
        }
        Ok(Self {
            config,
            step,
            first,
            second,
        })
    }

    /// One update. Gradients are checked for finiteness before any state
    /// changes, so a rejected step leaves parameters and moments intact.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<(), NnError> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(NnError::Shape {
                op: "nadam",
                detail: format!(
                    "optimizer tracks {} tensors, got {} params and {} grads",
                    self.first.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(NnError::Shape {
                    op: "nadam",
                    detail: format!("tensor {i}: param {:?}, grad {:?}", p.shape(), g.shape()),
                });
            }
            if !g.is_finite() {
                return Err(NnError::NonFinite {
                    what: format!("gradient in parameter tensor {i}"),
                });
            }
        }
        self.step += 1;
        let NadamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(b1, t as f64);
        let c2 = 1.0 - libm::pow(b2, t as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(grads[i].data()).zip(m).zip(v)
            {
                let g = gv.to_f64();
                let m_new = b1 * mv.to_f64() + (1.0 - b1) * g;
                let v_new = b2 * vv.to_f64() + (1.0 - b2) * g * g;
                *mv = T::from_f64(m_new);
                *vv = T::from_f64(v_new);
                let m_hat = m_new / c1;
                let v_hat = v_new / c2;
                let m_bar = b1 * m_hat + (1.0 - b1) * g / c1;
                *pv = T::from_f64(pv.to_f64() - lr * m_bar / (libm::sqrt(v_hat) + eps));
            }
        }
        Ok(())
    }
}
