use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::Real;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

pub const INIT_STD: f64 = 0.02;

macro_rules! block_fields {
    ($m:ident) => {
        $m! { ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2 }
    };
}

macro_rules! define_block {
    ($($f:ident),*) => {
        /// One pre-norm transformer layer. Biases and norm parameters are `1×n`.
        #[derive(Debug, Clone, PartialEq)]
        pub struct Block<F> {
            $(pub $f: Array2<F>,)*
        }

        impl<F: Real> Block<F> {
            pub const FIELDS: &'static [&'static str] = &[$(stringify!($f)),*];

            pub fn tensors(&self) -> Vec<(&'static str, &Array2<F>)> {
                vec![$((stringify!($f), &self.$f)),*]
            }

            pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<F>)> {
                vec![$((stringify!($f), &mut self.$f)),*]
            }

            fn map<G: Real>(&self, f: impl Fn(&Array2<F>) -> Array2<G>) -> Block<G> {
                Block { $($f: f(&self.$f)),* }
            }
        }
    };
}

block_fields!(define_block);

/// Full model weights. The output head reuses `wte`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub config: ModelConfig,
    pub wte: Array2<F>,
    pub wpe: Array2<F>,
    pub blocks: Vec<Block<F>>,
    pub lnf_g: Array2<F>,
    pub lnf_b: Array2<F>,
}

fn shape_of(c: &ModelConfig, field: &str) -> (usize, usize) {
    let (d, h) = (c.n_embd, c.hidden_dim);
    match field {
        "wq" | "wk" | "wv" | "wo" => (d, d),
        "w1" => (d, h),
        "w2" => (h, d),
        "b1" => (1, h),
        _ => (1, d),
    }
}

/// `(name, shape)` for every tensor in canonical order.
pub fn tensor_layout(c: &ModelConfig) -> Vec<(String, (usize, usize))> {
    let mut out = vec![
        ("wte".to_string(), (c.vocab_size, c.n_embd)),
        ("wpe".to_string(), (c.context_len, c.n_embd)),
    ];
    for l in 0..c.n_layer {
        for f in Block::<f32>::FIELDS {
            out.push((format!("h.{l}.{f}"), shape_of(c, f)));
        }
    }
    out.push(("lnf_g".to_string(), (1, c.n_embd)));
    out.push(("lnf_b".to_string(), (1, c.n_embd)));
    out
}

/// Weight decay applies to matrices only, never to norms or biases.
pub fn is_decayed(name: &str) -> bool {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    matches!(leaf, "wte" | "wpe" | "wq" | "wk" | "wv" | "wo" | "w1" | "w2" | "lora_a" | "lora_b")
}

impl<F: Real> Params<F> {
    pub fn tensors(&self) -> Vec<(String, &Array2<F>)> {
        let mut out = vec![("wte".to_string(), &self.wte), ("wpe".to_string(), &self.wpe)];
        for (l, b) in self.blocks.iter().enumerate() {
            out.extend(b.tensors().into_iter().map(|(f, t)| (format!("h.{l}.{f}"), t)));
        }
        out.push(("lnf_g".to_string(), &self.lnf_g));
        out.push(("lnf_b".to_string(), &self.lnf_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<F>)> {
        let mut out = vec![("wte".to_string(), &mut self.wte), ("wpe".to_string(), &mut self.wpe)];
        for (l, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.tensors_mut().into_iter().map(|(f, t)| (format!("h.{l}.{f}"), t)));
        }
        out.push(("lnf_g".to_string(), &mut self.lnf_g));
        out.push(("lnf_b".to_string(), &mut self.lnf_b));
        out
    }

    pub fn num_elements(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        let c = |a: &Array2<F>| a.mapv(|x| G::of(x.as_f64()));
        Params {
            config: self.config,
            wte: c(&self.wte),
            wpe: c(&self.wpe),
            blocks: self.blocks.iter().map(|b| b.map(c)).collect(),
            lnf_g: c(&self.lnf_g),
            lnf_b: c(&self.lnf_b),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Build from named tensors in any order; every layout entry must be
    /// present with the expected shape.
    pub fn from_named(config: ModelConfig, mut named: Vec<(String, Array2<F>)>) -> Result<Self> {
        config.validate()?;
        let mut take = |name: &str, shape: (usize, usize)| -> Result<Array2<F>> {
            let i = named
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::Integrity(format!("missing tensor {name}")))?;
            let (_, t) = named.swap_remove(i);
            if t.dim() != shape {
                return Err(Error::Integrity(format!("tensor {name} has shape {:?}, expected {shape:?}", t.dim())));
            }
            Ok(t)
        };
        let wte = take("wte", (config.vocab_size, config.n_embd))?;
        let wpe = take("wpe", (config.context_len, config.n_embd))?;
        let mut blocks = Vec::with_capacity(config.n_layer);
        for l in 0..config.n_layer {
            let mut t = |f: &str| take(&format!("h.{l}.{f}"), shape_of(&config, f));
            macro_rules! build {
                ($($f:ident),*) => { Block { $($f: t(stringify!($f))?),* } };
            }
            blocks.push(block_fields!(build));
        }
        let lnf_g = take("lnf_g", (1, config.n_embd))?;
        let lnf_b = take("lnf_b", (1, config.n_embd))?;
        if let Some((name, _)) = named.first() {
            return Err(Error::Integrity(format!("unexpected tensor {name}")));
        }
        Ok(Self { config, wte, wpe, blocks, lnf_g, lnf_b })
    }
}

/// Scaled-normal initialization: std 0.02, with the two residual output
/// projections further divided by `sqrt(2 · n_layer)`; norm gains 1, biases 0.
pub fn init_params<F: Real>(config: &ModelConfig, seed: u64) -> Result<Params<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residual_std = INIT_STD / (2.0 * config.n_layer as f64).sqrt();
    let mut named = Vec::new();
    for (name, shape) in tensor_layout(config) {
        let leaf = name.rsplit('.').next().unwrap_or(&name).to_string();
        let t = match leaf.as_str() {
            "ln1_g" | "ln2_g" | "lnf_g" => Array2::from_elem(shape, F::one()),
            "wte" | "wpe" | "wq" | "wk" | "wv" | "w1" => normal(shape, INIT_STD, &mut rng),
            "wo" | "w2" => normal(shape, residual_std, &mut rng),
            _ => Array2::zeros(shape),
        };
        named.push((name, t));
    }
    Params::from_named(*config, named)
}

pub fn init_model(config: &ModelConfig, seed: u64) -> Result<Params<f32>> {
    init_params(config, seed)
}

fn normal<F: Real>(shape: (usize, usize), std: f64, rng: &mut ChaCha8Rng) -> Array2<F> {
    let dist = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn(shape, || F::of(dist.sample(rng)))
}
