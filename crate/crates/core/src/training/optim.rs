use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Component, DccrnParams, Trainable};
use crate::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| (0.0..1.0).contains(&b);
        if !ok(self.beta1) || !ok(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moments per parameter tensor, in
/// [`DccrnParams::named`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &DccrnParams<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.named().iter().map(|(_, _, t)| vec![T::zero(); t.len()]).collect();
        Self { step: 0, m: zeros.clone(), v: zeros }
    }
}

/// Gradient buffers aligned with [`DccrnParams::named`]; `None` marks a
/// tensor that is not being trained.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<T = f32> {
    pub components: Vec<Component>,
    pub grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> ParamGrads<T> {
    pub fn zeros(params: &DccrnParams<T>, trainable: Trainable) -> Self {
        let named = params.named();
        Self {
            components: named.iter().map(|(_, c, _)| *c).collect(),
            grads: named.iter().map(|(_, c, t)| trainable.includes(*c).then(|| vec![T::zero(); t.len()])).collect(),
        }
    }

    pub fn accumulate(&mut self, i: usize, g: &[T]) {
        if let Some(buf) = self.grads[i].as_mut() {
            for (b, v) in buf.iter_mut().zip(g) {
                *b += *v;
            }
        }
    }

    pub fn scale(&mut self, c: T) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v *= c);
        }
    }
}

/// One bias-corrected Adam update of a single tensor; `step` counts from 1.
#[allow(clippy::too_many_arguments)]
pub fn adam_update<T: Real>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], step: u64, lr: T, cfg: &AdamConfig) {
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let eps = T::lit(cfg.eps);
    let c1 = T::one() - b1.powi(step as i32);
    let c2 = T::one() - b2.powi(step as i32);
    for (((p, g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * *g;
        *v = b2 * *v + (T::one() - b2) * *g * *g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies Adam to every tensor that has a gradient. Non-finite gradients
/// abort the step before anything is modified.
pub fn adam_step<T: Real>(
    params: &mut DccrnParams<T>,
    grads: &ParamGrads<T>,
    state: &mut AdamState<T>,
    lr: T,
    cfg: &AdamConfig,
) -> Result<()> {
    if !(lr > T::zero()) {
        return Err(Error::InvalidInput(format!("learning rate {lr} must be positive")));
    }
    let mut named = params.named_mut();
    if named.len() != grads.grads.len() || named.len() != state.m.len() {
        return Err(Error::Shape("gradient or optimizer state does not match the parameter layout".into()));
    }
    for ((name, _, t), g) in named.iter().zip(&grads.grads) {
        if let Some(g) = g {
            if g.len() != t.len() {
                return Err(Error::Shape(format!("{name}: gradient of {} values for {} parameters", g.len(), t.len())));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name}[{i}] is {}", g[i])));
            }
        }
    }
    state.step += 1;
    for (i, (_, _, t)) in named.iter_mut().enumerate() {
        if let Some(g) = &grads.grads[i] {
            adam_update(t.data_mut(), g, &mut state.m[i], &mut state.v[i], state.step, lr, cfg);
        }
    }
    Ok(())
}

/// Clamps recurrent-component gradients to `[−clip, clip]`.
pub fn clip_gru_gradients<T: Real>(grads: &mut ParamGrads<T>, clip: T) {
    for (c, g) in grads.components.iter().zip(grads.grads.iter_mut()) {
        if *c == Component::Rnn {
            if let Some(g) = g {
                g.iter_mut().for_each(|v| *v = v.max(-clip).min(clip));
            }
        }
    }
}
