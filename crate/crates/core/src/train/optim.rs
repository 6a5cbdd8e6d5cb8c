use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::autograd::Real;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for the trainable tensors, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<F> {
    pub step: u64,
    pub m: Vec<Array2<F>>,
    pub v: Vec<Array2<F>>,
}

impl<F: Real> OptimizerState<F> {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a Array2<F>>) -> Self {
        let m: Vec<Array2<F>> = shapes.into_iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        Self { step: 0, v: m.clone(), m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self { beta1: BETA1, beta2: BETA2, eps: ADAM_EPS, weight_decay }
    }

    /// One update. `decay[i]` says whether tensor `i` gets weight decay.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step<F: Real>(
        &self,
        state: &mut OptimizerState<F>,
        params: &mut [&mut Array2<F>],
        grads: &[Array2<F>],
        decay: &[bool],
        lr: f64,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != state.m.len() || decay.len() != grads.len() {
            return Err(Error::State("optimizer given mismatched tensor lists".into()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dim() != g.dim() || state.m[i].dim() != g.dim() {
                return Err(Error::State(format!("gradient {i} shape {:?} does not match parameter", g.dim())));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in tensor {i}")));
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (ob1, ob2) = (F::of(1.0 - self.beta1), F::of(1.0 - self.beta2));
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let shrink = if decay[i] { 1.0 - lr * self.weight_decay } else { 1.0 };
            let shrink = F::of(shrink);
            Zip::from(&mut **p)
                .and(&mut state.m[i])
                .and(&mut state.v[i])
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + ob1 * g;
                    *v = b2 * *v + ob2 * g * g;
                    let mhat = m.as_f64() / bc1;
                    let vhat = v.as_f64() / bc2;
                    *p = *p * shrink - F::of(lr * mhat / (vhat.sqrt() + self.eps));
                });
        }
        Ok(())
    }
}

/// Scale `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. `max_norm <= 0` disables clipping.
pub fn clip_grad_norm<F: Real>(grads: &mut [Array2<F>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x.as_f64() * x.as_f64())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = F::of(max_norm / (norm + 1e-6));
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}
