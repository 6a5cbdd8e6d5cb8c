use ndarray::Array2;
use rand::Rng;

use crate::autograd::{softmax_row, Graph, Real, Segment, Var};
use crate::error::{Error, Result};
use crate::model::{LoraAdapter, LoraTarget, Params};
use crate::tokenizer::TokenId;

/// Which leaves receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    Nothing,
    Base,
    Adapter,
}

/// Graph handles produced by [`forward_graph`]. `params` and `adapter`
/// follow the order of `Params::tensors` and `LoraAdapter::tensors`.
pub struct Forward {
    pub logits: Var,
    pub params: Vec<Var>,
    pub adapter: Vec<Var>,
    pub segments: Vec<Segment>,
    /// Attention output of every layer, for inspection.
    pub attention: Vec<Var>,
}

struct LoraVars<F> {
    a: Var,
    b: Var,
    scale: F,
    dropout: f64,
}

/// Record a forward pass over a batch of token sequences, stacked row-wise.
/// Passing `rng` switches on dropout.
pub fn forward_graph<F: Real, R: Rng + ?Sized>(
    g: &mut Graph<F>,
    params: &Params<F>,
    adapter: Option<&LoraAdapter<F>>,
    batch: &[&[TokenId]],
    trainable: Trainable,
    mut rng: Option<&mut R>,
) -> Result<Forward> {
    let cfg = &params.config;
    let mut segments = Vec::with_capacity(batch.len());
    let mut ids = Vec::new();
    let mut positions = Vec::new();
    for seq in batch {
        if seq.is_empty() {
            return Err(Error::Length("empty token sequence".into()));
        }
        if seq.len() > cfg.context_len {
            return Err(Error::Length(format!(
                "sequence of {} tokens exceeds context length {}",
                seq.len(),
                cfg.context_len
            )));
        }
        if let Some(&bad) = seq.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(Error::Decode(format!("token id {bad} outside vocabulary of {}", cfg.vocab_size)));
        }
        segments.push((ids.len(), seq.len()));
        ids.extend(seq.iter().map(|&t| t as usize));
        positions.extend(0..seq.len());
    }

    let base_grad = trainable == Trainable::Base;
    let param_vars: Vec<Var> = params.tensors().into_iter().map(|(_, t)| g.leaf(t.clone(), base_grad)).collect();
    let adapter_vars: Vec<Var> = adapter
        .map(|a| {
            a.tensors()
                .into_iter()
                .map(|(_, t)| g.leaf(t.clone(), trainable == Trainable::Adapter))
                .collect()
        })
        .unwrap_or_default();

    let per_block = crate::model::Block::<F>::FIELDS.len();
    let wte = param_vars[0];
    let wpe = param_vars[1];
    let lnf_g = param_vars[param_vars.len() - 2];
    let lnf_b = param_vars[param_vars.len() - 1];
    let lora_for = |layer: usize, target: LoraTarget| -> Option<LoraVars<F>> {
        let ad = adapter?;
        let i = ad.pairs.iter().position(|p| p.layer == layer && p.target == target)?;
        Some(LoraVars {
            a: adapter_vars[2 * i],
            b: adapter_vars[2 * i + 1],
            scale: F::of(ad.config.scaling()),
            dropout: ad.config.dropout,
        })
    };

    // Embedding adapter: shared by the lookup and the tied head.
    let wte = match lora_for(0, LoraTarget::Wte) {
        Some(l) => {
            let delta = g.matmul(l.a, l.b);
            let delta = g.scale(delta, l.scale);
            g.add(wte, delta)
        }
        None => wte,
    };
    let tok = g.embed(wte, &ids);
    let pos = g.embed(wpe, &positions);
    let mut x = g.add(tok, pos);
    x = maybe_dropout(g, x, cfg.dropout, &mut rng);
    let mut attention = Vec::with_capacity(cfg.n_layer);
    for layer in 0..cfg.n_layer {
        let v = &param_vars[2 + layer * per_block..2 + (layer + 1) * per_block];
        // Field order: ln1_g ln1_b wq bq wk bk wv bv wo bo ln2_g ln2_b w1 b1 w2 b2
        let h = g.layer_norm(x, v[0], v[1]);
        let q = linear(g, h, v[2], v[3], lora_for(layer, LoraTarget::Wq), &mut rng);
        let k = linear(g, h, v[4], v[5], lora_for(layer, LoraTarget::Wk), &mut rng);
        let vv = linear(g, h, v[6], v[7], lora_for(layer, LoraTarget::Wv), &mut rng);
        let a = g.attention(q, k, vv, cfg.n_heads, &segments);
        attention.push(a);
        let o = linear(g, a, v[8], v[9], lora_for(layer, LoraTarget::Wo), &mut rng);
        let o = maybe_dropout(g, o, cfg.dropout, &mut rng);
        x = g.add(x, o);
        let h = g.layer_norm(x, v[10], v[11]);
        let m = linear(g, h, v[12], v[13], lora_for(layer, LoraTarget::W1), &mut rng);
        let m = g.gelu(m);
        let m = linear(g, m, v[14], v[15], lora_for(layer, LoraTarget::W2), &mut rng);
        let m = maybe_dropout(g, m, cfg.dropout, &mut rng);
        x = g.add(x, m);
    }
    let x = g.layer_norm(x, lnf_g, lnf_b);
    let logits = g.matmul_bt(x, wte);
    Ok(Forward { logits, params: param_vars, adapter: adapter_vars, segments, attention })
}

fn maybe_dropout<F: Real, R: Rng + ?Sized>(g: &mut Graph<F>, x: Var, p: f64, rng: &mut Option<&mut R>) -> Var {
    match rng {
        Some(r) if p > 0.0 => g.dropout(x, p, *r),
        _ => x,
    }
}

fn linear<F: Real, R: Rng + ?Sized>(
    g: &mut Graph<F>,
    x: Var,
    w: Var,
    b: Var,
    lora: Option<LoraVars<F>>,
    rng: &mut Option<&mut R>,
) -> Var {
    let y = g.matmul(x, w);
    let y = g.add_row(y, b);
    match lora {
        None => y,
        Some(l) => {
            let xd = maybe_dropout(g, x, l.dropout, rng);
            let low = g.matmul(xd, l.a);
            let delta = g.matmul(low, l.b);
            let delta = g.scale(delta, l.scale);
            g.add(y, delta)
        }
    }
}

/// Eval-mode logits `[len × vocab]` for one sequence.
pub fn forward<F: Real>(params: &Params<F>, ids: &[TokenId], adapter: Option<&LoraAdapter<F>>) -> Result<Array2<F>> {
    let mut g = Graph::new();
    let out = forward_graph::<F, rand_chacha::ChaCha8Rng>(&mut g, params, adapter, &[ids], Trainable::Nothing, None)?;
    Ok(g.value(out.logits).clone())
}

/// Next-token targets and weights for stacked rows: row `t` of a segment
/// predicts token `t + 1` with weight `mask[t + 1]`.
pub fn shifted_targets<F: Real>(batch: &[(&[TokenId], &[u8])]) -> (Vec<usize>, Vec<F>, usize) {
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    let mut active = 0;
    for (ids, mask) in batch {
        for t in 0..ids.len() {
            if t + 1 < ids.len() && mask[t + 1] != 0 {
                targets.push(ids[t + 1] as usize);
                weights.push(F::one());
                active += 1;
            } else {
                targets.push(0);
                weights.push(F::zero());
            }
        }
    }
    (targets, weights, active)
}

/// Mean next-token cross-entropy over masked positions.
pub fn clm_loss<F: Real>(logits: &Array2<F>, ids: &[TokenId], mask: &[u8]) -> Result<f64> {
    if logits.nrows() != ids.len() || mask.len() != ids.len() {
        return Err(Error::Length(format!(
            "logits rows {}, ids {}, mask {} disagree",
            logits.nrows(),
            ids.len(),
            mask.len()
        )));
    }
    let (targets, weights, active) = shifted_targets::<F>(&[(ids, mask)]);
    if active == 0 {
        return Err(Error::EmptyMask);
    }
    let mut probs = vec![F::zero(); logits.ncols()];
    let mut total = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        if weights[i] != F::zero() {
            let lse = softmax_row(row, &mut probs);
            total += lse - row[targets[i]].as_f64();
        }
    }
    Ok(total / active as f64)
}
