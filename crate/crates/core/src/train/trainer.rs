use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Graph;
use crate::error::{Error, Result};
use crate::model::{forward_graph, is_decayed, shifted_targets, LoraAdapter, Params, Trainable};
use crate::tokenizer::{EncodedExample, TokenId};
use crate::train::distill::DistillConfig;
use crate::train::optim::{clip_grad_norm, AdamW, OptimizerState};
use crate::train::schedule::{lr_at, EarlyStopState, Retention};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables.
    #[serde(default = "default_clip")]
    pub max_grad_norm: f64,
    /// Held-out share for stages that split their own validation set.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Hard cap on optimizer steps across all epochs.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_keep_top")]
    pub keep_top: usize,
}

fn default_patience() -> usize {
    2
}
fn default_clip() -> f64 {
    1.0
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_keep_top() -> usize {
    2
}

impl TrainConfig {
    /// Repeat fine-tuning: lr 5e-4, batch 4, 50 warmup steps, ≤ 10 epochs, decay 0.01.
    pub fn level1() -> Self {
        Self {
            lr: 5e-4,
            batch_size: 4,
            warmup_steps: 50,
            max_epochs: 10,
            weight_decay: 0.01,
            patience: default_patience(),
            seed: 0,
            max_grad_norm: default_clip(),
            val_fraction: default_val_fraction(),
            max_steps: None,
            keep_top: default_keep_top(),
        }
    }

    /// Property fine-tuning: lr 1e-5, batch 8, otherwise as level 1.
    pub fn level2() -> Self {
        Self { lr: 1e-5, batch_size: 8, ..Self::level1() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        Ok(())
    }
}

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Trainable state: base weights plus an optional adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub params: Params<f32>,
    pub adapter: Option<LoraAdapter<f32>>,
}

pub enum Objective<'a> {
    Clm,
    /// Teacher logits aligned with the train and validation examples.
    Distill {
        cfg: DistillConfig,
        train: &'a [Array2<f32>],
        val: &'a [Array2<f32>],
    },
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub history: Vec<EpochStats>,
    pub log: Vec<LogRecord>,
    pub steps: usize,
    pub stopped_early: bool,
    /// `(val_loss, epoch)` of retained states, best first.
    pub retained: Vec<(f64, usize)>,
}

impl FitReport {
    pub fn best_epoch(&self) -> usize {
        self.retained[0].1
    }

    pub fn best_val(&self) -> f64 {
        self.retained[0].0
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.log.iter().filter(|r| r.split == "train").map(|r| r.loss).collect()
    }

    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

pub struct FitOutcome {
    /// Retained states, best first.
    pub retained: Vec<(f64, usize, Weights)>,
    pub report: FitReport,
}

struct BatchLoss {
    loss: f64,
    grads: Vec<Array2<f32>>,
}

fn stack_rows(parts: &[&Array2<f32>]) -> Array2<f32> {
    let views: Vec<ArrayView2<f32>> = parts.iter().map(|a| a.view()).collect();
    concatenate(Axis(0), &views).expect("equal widths")
}

/// Loss sum and active count over a batch, optionally with gradients.
fn batch_loss(
    w: &Weights,
    examples: &[&EncodedExample],
    teacher: Option<(&DistillConfig, Vec<&Array2<f32>>)>,
    trainable: Trainable,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, usize, Option<BatchLoss>)> {
    let seqs: Vec<&[TokenId]> = examples.iter().map(|e| e.real_ids()).collect();
    let pairs: Vec<(&[TokenId], &[u8])> = examples.iter().map(|e| (e.real_ids(), e.real_mask())).collect();
    let (targets, weights, active) = shifted_targets::<f32>(&pairs);
    if active == 0 {
        return Err(Error::EmptyMask);
    }
    let mut g = Graph::<f32>::new();
    let out = forward_graph(&mut g, &w.params, w.adapter.as_ref(), &seqs, trainable, rng)?;
    let sum = match teacher {
        None => g.cross_entropy_sum(out.logits, &targets, &weights),
        Some((cfg, rows)) => {
            let t = stack_rows(&rows);
            g.distill_sum(out.logits, &t, &targets, &weights, cfg.alpha as f32, cfg.temperature as f32)
        }
    };
    let total = g.scalar(sum) as f64;
    if !total.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {total}")));
    }
    if trainable == Trainable::Nothing {
        return Ok((total, active, None));
    }
    let loss = g.scale(sum, 1.0 / active as f32);
    let mut grads = g.backward(loss)?;
    let vars = if trainable == Trainable::Base { &out.params } else { &out.adapter };
    let grads = vars
        .iter()
        .map(|&v| grads.take(v).ok_or_else(|| Error::Graph("missing gradient for trainable tensor".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok((total, active, Some(BatchLoss { loss: g.scalar(loss) as f64, grads })))
}

/// Mean masked loss over `examples` in eval mode.
pub fn evaluate(w: &Weights, examples: &[EncodedExample], objective: &Objective, batch_size: usize) -> Result<f64> {
    let (mut total, mut active) = (0.0, 0usize);
    for (b, chunk) in examples.chunks(batch_size.max(1)).enumerate() {
        let refs: Vec<&EncodedExample> = chunk.iter().collect();
        let teacher = match objective {
            Objective::Clm => None,
            Objective::Distill { cfg, val, .. } => {
                let start = b * batch_size.max(1);
                Some((cfg, val[start..start + chunk.len()].iter().collect()))
            }
        };
        let (t, a, _) = batch_loss(w, &refs, teacher, Trainable::Nothing, None)?;
        total += t;
        active += a;
    }
    if active == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / active as f64)
}

/// Minibatch training with warmup, clipping, early stopping on validation
/// loss and top-k retention.
pub fn fit(
    init: Weights,
    trainable: Trainable,
    train: &[EncodedExample],
    val: &[EncodedExample],
    objective: &Objective,
    cfg: &TrainConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyInput("training and validation sets must be non-empty".into()));
    }
    if trainable == Trainable::Adapter && init.adapter.is_none() {
        return Err(Error::State("adapter training requested without an adapter".into()));
    }
    if let Objective::Distill { cfg: d, train: tl, val: vl } = objective {
        d.validate()?;
        if tl.len() != train.len() || vl.len() != val.len() {
            return Err(Error::Config("teacher logits are not aligned with the examples".into()));
        }
    }
    let mut w = init;
    let opt = AdamW::new(cfg.weight_decay);
    let (names, mut state) = {
        let tensors: Vec<(String, &Array2<f32>)> = match trainable {
            Trainable::Base => w.params.tensors(),
            Trainable::Adapter => w.adapter.as_ref().expect("checked").tensors(),
            Trainable::Nothing => return Err(Error::State("nothing to train".into())),
        };
        let names: Vec<String> = tensors.iter().map(|(n, _)| n.clone()).collect();
        (names, OptimizerState::new(tensors.into_iter().map(|(_, t)| t)))
    };
    let decay: Vec<bool> = names.iter().map(|n| is_decayed(n)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut early = EarlyStopState::new(cfg.patience);
    let mut retention = Retention::new(cfg.keep_top);
    let mut log = Vec::new();
    let mut history = Vec::new();
    let mut step = 0usize;
    let mut stopped_early = false;
    let cap = cfg.max_steps.unwrap_or(usize::MAX);

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if step >= cap {
                break;
            }
            let lr = lr_at(step, cfg.lr, cfg.warmup_steps);
            let refs: Vec<&EncodedExample> = chunk.iter().map(|&i| &train[i]).collect();
            let teacher = match objective {
                Objective::Clm => None,
                Objective::Distill { cfg: d, train: tl, .. } => Some((d, chunk.iter().map(|&i| &tl[i]).collect())),
            };
            let (_, _, bl) = batch_loss(&w, &refs, teacher, trainable, Some(&mut rng))?;
            let BatchLoss { loss, mut grads } = bl.expect("training batch has gradients");
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            let mut tensors: Vec<&mut Array2<f32>> = match trainable {
                Trainable::Base => w.params.tensors_mut().into_iter().map(|(_, t)| t).collect(),
                _ => w.adapter.as_mut().expect("checked").tensors_mut().into_iter().map(|(_, t)| t).collect(),
            };
            opt.step(&mut state, &mut tensors, &grads, &decay, lr)?;
            log.push(LogRecord { step, lr, loss, split: "train".into() });
            epoch_loss += loss;
            epoch_batches += 1;
            step += 1;
        }
        if epoch_batches == 0 {
            break;
        }
        let val_loss = evaluate(&w, val, objective, cfg.batch_size)?;
        log.push(LogRecord { step, lr: lr_at(step, cfg.lr, cfg.warmup_steps), loss: val_loss, split: "val".into() });
        history.push(EpochStats { epoch, train_loss: epoch_loss / epoch_batches as f64, val_loss });
        retention.offer(val_loss, epoch, w.clone());
        if early.update(epoch, val_loss) {
            stopped_early = true;
            break;
        }
        if step >= cap {
            break;
        }
    }
    if history.is_empty() {
        return Err(Error::State("training ran no steps".into()));
    }
    let retained = retention.into_entries();
    let report = FitReport {
        history,
        log,
        steps: step,
        stopped_early,
        retained: retained.iter().map(|(l, e, _)| (*l, *e)).collect(),
    };
    Ok(FitOutcome { retained, report })
}
