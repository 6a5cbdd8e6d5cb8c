use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autograd::Real;
use crate::error::{Error, Result};
use crate::model::{Block, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoraTarget {
    Wq,
    Wk,
    Wv,
    Wo,
    W1,
    W2,
    /// Token embedding, shared with the tied output head.
    Wte,
}

impl LoraTarget {
    pub const ATTENTION: [LoraTarget; 4] = [LoraTarget::Wq, LoraTarget::Wk, LoraTarget::Wv, LoraTarget::Wo];

    pub fn name(self) -> &'static str {
        match self {
            LoraTarget::Wq => "wq",
            LoraTarget::Wk => "wk",
            LoraTarget::Wv => "wv",
            LoraTarget::Wo => "wo",
            LoraTarget::W1 => "w1",
            LoraTarget::W2 => "w2",
            LoraTarget::Wte => "wte",
        }
    }

    /// Applies to the whole model rather than to each block.
    pub fn is_global(self) -> bool {
        self == LoraTarget::Wte
    }

    /// The adapted weight; `layer` is ignored for global targets.
    pub fn weight<F>(self, params: &Params<F>, layer: usize) -> &Array2<F> {
        if self.is_global() {
            return &params.wte;
        }
        let b = &params.blocks[layer];
        match self {
            LoraTarget::Wq => &b.wq,
            LoraTarget::Wk => &b.wk,
            LoraTarget::Wv => &b.wv,
            LoraTarget::Wo => &b.wo,
            LoraTarget::W1 => &b.w1,
            LoraTarget::W2 => &b.w2,
            LoraTarget::Wte => unreachable!(),
        }
    }

    pub fn weight_mut<F>(self, params: &mut Params<F>, layer: usize) -> Option<&mut Array2<F>> {
        if self.is_global() {
            return Some(&mut params.wte);
        }
        let b: &mut Block<F> = params.blocks.get_mut(layer)?;
        Some(match self {
            LoraTarget::Wq => &mut b.wq,
            LoraTarget::Wk => &mut b.wk,
            LoraTarget::Wv => &mut b.wv,
            LoraTarget::Wo => &mut b.wo,
            LoraTarget::W1 => &mut b.w1,
            LoraTarget::W2 => &mut b.w2,
            LoraTarget::Wte => unreachable!(),
        })
    }
}

impl fmt::Display for LoraTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LoraTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wq" => Ok(LoraTarget::Wq),
            "wk" => Ok(LoraTarget::Wk),
            "wv" => Ok(LoraTarget::Wv),
            "wo" => Ok(LoraTarget::Wo),
            "w1" => Ok(LoraTarget::W1),
            "w2" => Ok(LoraTarget::W2),
            "wte" => Ok(LoraTarget::Wte),
            _ => Err(Error::Config(format!("unknown LoRA target '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_targets")]
    pub targets: Vec<LoraTarget>,
}

fn default_targets() -> Vec<LoraTarget> {
    LoraTarget::ATTENTION.to_vec()
}

impl Default for LoraConfig {
    /// r = 16, α = 32, dropout 0.1 on the attention projections.
    fn default() -> Self {
        Self { rank: 16, alpha: 32.0, dropout: 0.1, targets: default_targets() }
    }
}

impl LoraConfig {
    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    pub fn with_targets(mut self, names: &[&str]) -> Result<Self> {
        self.targets = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("LoRA rank must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("LoRA needs at least one target".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("LoRA dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Low-rank pair for one weight: `W + (α/r)·A·B`. Global targets use layer 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraPair<F> {
    pub layer: usize,
    pub target: LoraTarget,
    pub a: Array2<F>,
    pub b: Array2<F>,
}

impl<F> LoraPair<F> {
    pub fn name(&self) -> String {
        slot_name(self.layer, self.target)
    }
}

fn slot_name(layer: usize, target: LoraTarget) -> String {
    if target.is_global() {
        target.name().to_string()
    } else {
        format!("h.{layer}.{target}")
    }
}

/// `(layer, target)` slots in tensor order: global targets first, then per block.
fn slots(config: &LoraConfig, n_layer: usize) -> Vec<(usize, LoraTarget)> {
    let mut out: Vec<(usize, LoraTarget)> =
        config.targets.iter().filter(|t| t.is_global()).map(|&t| (0, t)).collect();
    for layer in 0..n_layer {
        out.extend(config.targets.iter().filter(|t| !t.is_global()).map(|&t| (layer, t)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter<F> {
    pub config: LoraConfig,
    pub pairs: Vec<LoraPair<F>>,
}

impl<F: Real> LoraAdapter<F> {
    pub fn pair(&self, layer: usize, target: LoraTarget) -> Option<&LoraPair<F>> {
        self.pairs.iter().find(|p| p.layer == layer && p.target == target)
    }

    /// Named tensors, `h.{layer}.{target}.lora_a` / `.lora_b` (`wte.lora_a` for the embedding).
    pub fn tensors(&self) -> Vec<(String, &Array2<F>)> {
        self.pairs
            .iter()
            .flat_map(|p| [(format!("{}.lora_a", p.name()), &p.a), (format!("{}.lora_b", p.name()), &p.b)])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<F>)> {
        self.pairs
            .iter_mut()
            .flat_map(|p| {
                let name = p.name();
                [(format!("{name}.lora_a"), &mut p.a), (format!("{name}.lora_b"), &mut p.b)]
            })
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.pairs.iter().map(|p| p.a.len() + p.b.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> LoraAdapter<G> {
        let c = |a: &Array2<F>| a.mapv(|x| G::of(x.as_f64()));
        LoraAdapter {
            config: self.config.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|p| LoraPair { layer: p.layer, target: p.target, a: c(&p.a), b: c(&p.b) })
                .collect(),
        }
    }

    /// Rebuild from named tensors, checking shapes against `params`.
    pub fn from_named(config: LoraConfig, params: &Params<F>, mut named: Vec<(String, Array2<F>)>) -> Result<Self> {
        config.validate()?;
        let mut pairs = Vec::new();
        for (layer, target) in slots(&config, params.config.n_layer) {
            let (d_in, d_out) = target.weight(params, layer).dim();
            let mut take = |suffix: &str, shape: (usize, usize)| -> Result<Array2<F>> {
                let name = format!("{}.{suffix}", slot_name(layer, target));
                let i = named
                    .iter()
                    .position(|(n, _)| *n == name)
                    .ok_or_else(|| Error::Integrity(format!("missing adapter tensor {name}")))?;
                let (_, t) = named.swap_remove(i);
                if t.dim() != shape {
                    return Err(Error::Integrity(format!("adapter tensor {name} has shape {:?}", t.dim())));
                }
                Ok(t)
            };
            let a = take("lora_a", (d_in, config.rank))?;
            let b = take("lora_b", (config.rank, d_out))?;
            pairs.push(LoraPair { layer, target, a, b });
        }
        if let Some((name, _)) = named.first() {
            return Err(Error::Integrity(format!("unexpected adapter tensor {name}")));
        }
        Ok(Self { config, pairs })
    }
}

/// Fresh adapter that leaves the model unchanged. Linear weights get
/// `A ~ U(±1/√d_in)`, `B = 0`; the embedding gets `A = 0`, `B ~ N(0, 1)`
/// since its input is one-hot.
pub fn attach_lora<F: Real>(params: &Params<F>, config: &LoraConfig, seed: u64) -> Result<LoraAdapter<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (layer, target) in slots(config, params.config.n_layer) {
        let (d_in, d_out) = target.weight(params, layer).dim();
        let (a, b) = if target.is_global() {
            let b = Array2::from_shape_simple_fn((config.rank, d_out), || F::of(rng.sample(StandardNormal)));
            (Array2::zeros((d_in, config.rank)), b)
        } else {
            let bound = 1.0 / (d_in as f64).sqrt();
            let a = Array2::from_shape_simple_fn((d_in, config.rank), || F::of(rng.random_range(-bound..bound)));
            (a, Array2::zeros((config.rank, d_out)))
        };
        pairs.push(LoraPair { layer, target, a, b });
    }
    Ok(LoraAdapter { config: config.clone(), pairs })
}

/// Add fresh pairs for `targets` the adapter does not cover yet, keeping its
/// rank, scaling and existing pairs.
pub fn extend_lora<F: Real>(
    adapter: &LoraAdapter<F>,
    params: &Params<F>,
    targets: &[LoraTarget],
    seed: u64,
) -> Result<LoraAdapter<F>> {
    let mut config = adapter.config.clone();
    let new: Vec<LoraTarget> = targets.iter().copied().filter(|t| !config.targets.contains(t)).collect();
    if new.is_empty() {
        return Ok(adapter.clone());
    }
    let fresh = attach_lora(params, &LoraConfig { targets: new.clone(), ..config.clone() }, seed)?;
    config.targets.extend(new);
    let mut pool: Vec<LoraPair<F>> = adapter.pairs.iter().cloned().chain(fresh.pairs).collect();
    let mut pairs = Vec::with_capacity(pool.len());
    for (layer, target) in slots(&config, params.config.n_layer) {
        let i = pool
            .iter()
            .position(|p| p.layer == layer && p.target == target)
            .ok_or_else(|| Error::Config(format!("adapter has no pair for {}", slot_name(layer, target))))?;
        pairs.push(pool.swap_remove(i));
    }
    Ok(LoraAdapter { config, pairs })
}

/// Fold the adapter into a copy of the base weights.
pub fn merge_lora<F: Real>(params: &Params<F>, adapter: &LoraAdapter<F>) -> Result<Params<F>> {
    let mut merged = params.clone();
    let s = F::of(adapter.config.scaling());
    for p in &adapter.pairs {
        let w = p
            .target
            .weight_mut(&mut merged, p.layer)
            .ok_or_else(|| Error::Config(format!("adapter layer {} not in model", p.layer)))?;
        let delta = p.a.dot(&p.b) * s;
        if delta.dim() != w.dim() {
            return Err(Error::Config(format!("adapter for {} does not fit the weight", p.name())));
        }
        *w += &delta;
    }
    Ok(merged)
}
