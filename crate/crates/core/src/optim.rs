//! AdamW with decoupled weight decay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Parameters, Tensor, Trainables};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

/// Optimizer state: step counter and per-tensor moment estimates.
#[derive(Clone, Debug)]
pub struct AdamW<T: Real> {
    pub config: AdamWConfig,
    pub step: u64,
    moments: BTreeMap<Tensor, Moments<T>>,
}

impl<T: Real> AdamW<T> {
    pub fn new(config: AdamWConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, step: 0, moments: BTreeMap::new() })
    }

    /// Length of the first-moment buffer for a tensor, once allocated.
    pub fn moment_len(&self, tensor: Tensor) -> Option<usize> {
        self.moments.get(&tensor).map(|m| m.m.len())
    }

    /// One update of every enabled tensor:
    /// `p ← p(1 − lr·wd) − lr·m̂/(√v̂ + ε)`.
    pub fn update(&mut self, params: &mut Parameters<T>, grads: &Parameters<T>, enabled: &Trainables) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::one() - T::lit(c.beta1.powi(self.step as i32));
        let bc2 = T::one() - T::lit(c.beta2.powi(self.step as i32));
        let lr = T::lit(c.lr);
        let decay = T::one() - lr * T::lit(c.weight_decay);
        let eps = T::lit(c.eps);
        for tensor in Tensor::ALL {
            if !tensor.enabled(enabled) {
                continue;
            }
            let g = grads.reals(tensor);
            let p = params.reals_mut(tensor);
            let mom = self
                .moments
                .entry(tensor)
                .or_insert_with(|| Moments { m: vec![T::zero(); g.len()], v: vec![T::zero(); g.len()] });
            for (((p, &g), m), v) in p.into_iter().zip(&g).zip(mom.m.iter_mut()).zip(mom.v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p = *p * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
