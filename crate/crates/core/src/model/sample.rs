use std::borrow::Cow;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Real, LN_EPS};
use crate::error::{Error, Result};
use crate::model::{merge_lora, LoraAdapter, Params};
use crate::tokenizer::{is_bin, is_residue, TokenId, EOS, N_PROPERTIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// 0 disables top-k filtering.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_max_new")]
    pub max_new: usize,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_top_k() -> usize {
    50
}
fn default_max_new() -> usize {
    512
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { temperature: default_temperature(), top_k: default_top_k(), max_new: default_max_new() }
    }
}

impl SamplingConfig {
    pub fn greedy() -> Self {
        Self { temperature: 0.0, ..Self::default() }
    }
}

/// Restriction on which ids may be emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// Emit exactly this many property-bin tokens, then stop.
    Bins(usize),
    /// Residues or EOS only.
    Residues,
}

impl Constraint {
    pub fn property_bins() -> Self {
        Constraint::Bins(N_PROPERTIES)
    }

    fn allows(self, id: TokenId) -> bool {
        match self {
            Constraint::None => true,
            Constraint::Bins(_) => is_bin(id),
            Constraint::Residues => is_residue(id) || id == EOS,
        }
    }
}

/// Incremental decoder with a key/value cache. Weights are read-only, so one
/// model can serve many decoders.
pub struct Decoder<'a, F: Real> {
    params: Cow<'a, Params<F>>,
    keys: Vec<Array2<F>>,
    values: Vec<Array2<F>>,
    pos: usize,
}

fn layer_norm<F: Real>(x: ArrayView1<F>, g: &Array2<F>, b: &Array2<F>) -> Array1<F> {
    let d = x.len() as f64;
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / d;
    let var = x.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / d;
    let r = 1.0 / (var + LN_EPS).sqrt();
    let xhat = x.mapv(|v| F::of((v.as_f64() - mean) * r));
    &(&xhat * &g.row(0)) + &b.row(0)
}

fn gelu<F: Real>(v: F) -> F {
    let u = v.as_f64();
    F::of(0.5 * u * (1.0 + (0.797_884_560_802_865_4 * (u + 0.044715 * u * u * u)).tanh()))
}

impl<'a, F: Real> Decoder<'a, F> {
    /// Merges the adapter (if any) into a private copy of the weights.
    pub fn new(params: &'a Params<F>, adapter: Option<&LoraAdapter<F>>) -> Result<Self> {
        let params = match adapter {
            Some(a) => Cow::Owned(merge_lora(params, a)?),
            None => Cow::Borrowed(params),
        };
        let c = params.config;
        Ok(Self {
            keys: (0..c.n_layer).map(|_| Array2::zeros((c.context_len, c.n_embd))).collect(),
            values: (0..c.n_layer).map(|_| Array2::zeros((c.context_len, c.n_embd))).collect(),
            params,
            pos: 0,
        })
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Feed one token, return next-token logits.
    pub fn step(&mut self, token: TokenId) -> Result<Array1<F>> {
        let p = &*self.params;
        let c = p.config;
        if self.pos >= c.context_len {
            return Err(Error::Length(format!("context length {} exhausted", c.context_len)));
        }
        if token as usize >= c.vocab_size {
            return Err(Error::Decode(format!("token id {token} outside vocabulary")));
        }
        let t = self.pos;
        let dh = c.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut x = &p.wte.row(token as usize) + &p.wpe.row(t);
        for (l, b) in p.blocks.iter().enumerate() {
            let h = layer_norm(x.view(), &b.ln1_g, &b.ln1_b);
            let q = &h.dot(&b.wq) + &b.bq.row(0);
            let k = &h.dot(&b.wk) + &b.bk.row(0);
            let v = &h.dot(&b.wv) + &b.bv.row(0);
            self.keys[l].row_mut(t).assign(&k);
            self.values[l].row_mut(t).assign(&v);
            let mut att = Array1::zeros(c.n_embd);
            for head in 0..c.n_heads {
                let cols = head * dh..(head + 1) * dh;
                let kh = self.keys[l].slice(s![..=t, cols.clone()]);
                let vh = self.values[l].slice(s![..=t, cols.clone()]);
                let scores: Vec<f64> = kh.dot(&q.slice(s![cols.clone()])).iter().map(|s| s.as_f64() * scale).collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                let w = Array1::from_iter(scores.iter().map(|s| F::of((s - m).exp() / z)));
                att.slice_mut(s![cols]).assign(&w.dot(&vh));
            }
            let o = &att.dot(&b.wo) + &b.bo.row(0);
            x = &x + &o;
            let h = layer_norm(x.view(), &b.ln2_g, &b.ln2_b);
            let m = (&h.dot(&b.w1) + &b.b1.row(0)).mapv(gelu);
            let m = &m.dot(&b.w2) + &b.b2.row(0);
            x = &x + &m;
        }
        let x = layer_norm(x.view(), &p.lnf_g, &p.lnf_b);
        self.pos += 1;
        Ok(p.wte.dot(&x))
    }
}

/// Pick the next id from `logits` under `constraint`.
fn choose<F: Real>(logits: &Array1<F>, constraint: Constraint, cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> TokenId {
    let mut cand: Vec<(TokenId, f64)> = logits
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as TokenId, v.as_f64()))
        .filter(|&(i, _)| constraint.allows(i))
        .collect();
    // Stable sort keeps the lower id first among ties.
    cand.sort_by(|a, b| b.1.total_cmp(&a.1));
    if cfg.temperature == 0.0 {
        return cand[0].0;
    }
    if cfg.top_k > 0 {
        cand.truncate(cfg.top_k);
    }
    let m = cand[0].1;
    let weights: Vec<f64> = cand.iter().map(|&(_, v)| ((v - m) / cfg.temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (&(id, _), w) in cand.iter().zip(&weights) {
        if u < *w {
            return id;
        }
        u -= w;
    }
    cand[cand.len() - 1].0
}

/// Continue `prompt`. Returns only the new tokens; a terminating EOS is
/// included. `Bins(n)` emits exactly `n` tokens.
pub fn sample<F: Real>(
    params: &Params<F>,
    adapter: Option<&LoraAdapter<F>>,
    prompt: &[TokenId],
    cfg: &SamplingConfig,
    constraint: Constraint,
    seed: u64,
) -> Result<Vec<TokenId>> {
    if prompt.is_empty() {
        return Err(Error::Prompt("prompt is empty".into()));
    }
    if !(cfg.temperature >= 0.0) {
        return Err(Error::Config(format!("temperature {} must be non-negative", cfg.temperature)));
    }
    let ctx = params.config.context_len;
    if prompt.len() > ctx {
        return Err(Error::Prompt(format!("prompt of {} tokens exceeds context length {ctx}", prompt.len())));
    }
    let mut dec = Decoder::new(params, adapter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logits = None;
    for &t in prompt {
        logits = Some(dec.step(t)?);
    }
    let budget = match constraint {
        Constraint::Bins(n) => n,
        _ => cfg.max_new,
    };
    let mut out = Vec::new();
    while out.len() < budget {
        let next = choose(logits.as_ref().expect("prompt non-empty"), constraint, cfg, &mut rng);
        out.push(next);
        let stop = next == EOS && !matches!(constraint, Constraint::Bins(_));
        if stop || out.len() == budget || dec.position() >= ctx {
            break;
        }
        logits = Some(dec.step(next)?);
    }
    Ok(out)
}
