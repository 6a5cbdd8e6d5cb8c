//! Backprop against central finite differences on a whole model.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autograd::Graph;
use crate::error::{Error, Result};
use crate::model::{forward_graph, shifted_targets, LoraAdapter, Params, Trainable};
use crate::tokenizer::TokenId;

/// Denominator floor. Central differences carry roughly 1e-10 of rounding noise, and some
/// gradients (key biases under softmax) are exactly zero.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

type Batch<'a> = [(&'a [TokenId], &'a [u8])];

fn mean_loss(params: &Params<f64>, adapter: Option<&LoraAdapter<f64>>, batch: &Batch) -> Result<f64> {
    let seqs: Vec<&[TokenId]> = batch.iter().map(|(ids, _)| *ids).collect();
    let (targets, weights, active) = shifted_targets::<f64>(batch);
    if active == 0 {
        return Err(Error::EmptyMask);
    }
    let mut g = Graph::new();
    let out = forward_graph::<f64, ChaCha8Rng>(&mut g, params, adapter, &seqs, Trainable::Nothing, None)?;
    let sum = g.cross_entropy_sum(out.logits, &targets, &weights);
    Ok(g.scalar(sum) / active as f64)
}

fn analytic(
    params: &Params<f64>,
    adapter: Option<&LoraAdapter<f64>>,
    batch: &Batch,
    trainable: Trainable,
) -> Result<Vec<ndarray::Array2<f64>>> {
    let seqs: Vec<&[TokenId]> = batch.iter().map(|(ids, _)| *ids).collect();
    let (targets, weights, active) = shifted_targets::<f64>(batch);
    let mut g = Graph::new();
    let out = forward_graph::<f64, ChaCha8Rng>(&mut g, params, adapter, &seqs, trainable, None)?;
    let sum = g.cross_entropy_sum(out.logits, &targets, &weights);
    let loss = g.scale(sum, 1.0 / active as f64);
    let mut grads = g.backward(loss)?;
    let vars = if trainable == Trainable::Base { out.params } else { out.adapter };
    vars.into_iter()
        .map(|v| grads.take(v).ok_or_else(|| Error::Graph("missing gradient".into())))
        .collect()
}

/// Check up to `per_group` random coordinates of every base tensor, and of
/// every adapter tensor when an adapter is given.
pub fn check_model_gradients(
    params: &Params<f64>,
    adapter: Option<&LoraAdapter<f64>>,
    batch: &Batch,
    per_group: usize,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::new();

    let base = analytic(params, adapter, batch, Trainable::Base)?;
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for (k, (name, grad)) in names.into_iter().zip(&base).enumerate() {
        let n = grad.len();
        let mut worst = 0.0f64;
        let picks = sample_indices(&mut rng, n, per_group.min(n));
        for flat in picks.iter() {
            let mut p = params.clone();
            let numeric = {
                let t = p.tensors_mut().into_iter().nth(k).expect("same layout").1;
                let x = t.as_slice_mut().expect("contiguous")[flat];
                t.as_slice_mut().unwrap()[flat] = x + eps;
                let up = mean_loss(&p, adapter, batch)?;
                let t = p.tensors_mut().into_iter().nth(k).unwrap().1;
                t.as_slice_mut().unwrap()[flat] = x - eps;
                let down = mean_loss(&p, adapter, batch)?;
                (up - down) / (2.0 * eps)
            };
            worst = worst.max(rel_error(grad.as_slice().expect("contiguous")[flat], numeric));
        }
        groups.push(GroupCheck { name, checked: picks.len(), max_rel_error: worst });
    }

    if let Some(ad) = adapter {
        let grads = analytic(params, adapter, batch, Trainable::Adapter)?;
        let names: Vec<String> = ad.tensors().into_iter().map(|(n, _)| n).collect();
        for (k, (name, grad)) in names.into_iter().zip(&grads).enumerate() {
            let n = grad.len();
            let mut worst = 0.0f64;
            let picks = sample_indices(&mut rng, n, per_group.min(n));
            for flat in picks.iter() {
                let mut a = ad.clone();
                let mut shifted = |delta: f64| -> Result<f64> {
                    let t = a.tensors_mut().into_iter().nth(k).expect("same layout").1;
                    t.as_slice_mut().expect("contiguous")[flat] += delta;
                    mean_loss(params, Some(&a), batch)
                };
                let up = shifted(eps)?;
                let down = shifted(-2.0 * eps)?;
                worst = worst.max(rel_error(grad.as_slice().expect("contiguous")[flat], (up - down) / (2.0 * eps)));
            }
            groups.push(GroupCheck { name, checked: picks.len(), max_rel_error: worst });
        }
    }
    Ok(GradCheckReport { groups })
}
