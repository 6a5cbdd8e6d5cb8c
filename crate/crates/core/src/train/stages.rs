//! The three training stages and the inference entry points built on them.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    attach_lora, extend_lora, init_model, merge_lora, sample, Checkpoint, CheckpointMeta, Constraint, LoraConfig, ModelConfig,
    SamplingConfig, Trainable,
};
use crate::seqdata::{AminoAcidSequence, FoldPlan, LabeledRecord, MinMaxScaler, PropertyVector};
use crate::tokenizer::{
    build_example, build_lm_example, decode_property_tokens, decode_tokens, estimate_prompt, generate_prompt,
    unconditional_prompt, Direction, EncodedExample, TruncationStats, CONDITIONED_OVERHEAD,
};
use crate::train::distill::{DistillConfig, TeacherSource};
use crate::train::trainer::{fit, FitReport, Objective, TrainConfig, Weights};

/// Best checkpoint of a stage plus everything else it retained.
pub struct StageResult {
    pub checkpoint: Checkpoint,
    /// Retained checkpoints, best first (includes `checkpoint`).
    pub retained: Vec<Checkpoint>,
    pub report: FitReport,
    pub truncation: TruncationStats,
}

/// Effective example length for a model.
pub fn example_len(config: &ModelConfig, max_len: usize) -> usize {
    max_len.min(config.context_len)
}

pub fn lm_examples(corpus: &[AminoAcidSequence], max_len: usize) -> Result<(Vec<EncodedExample>, TruncationStats)> {
    let mut stats = TruncationStats::default();
    let examples = corpus
        .iter()
        .map(|s| {
            let e = build_lm_example(s, max_len)?;
            stats.record(&e);
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((examples, stats))
}

/// Shuffled `(train, val)` index split with at least one item on each side.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::EmptyInput(format!("need at least 2 examples to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn finish(
    retained: Vec<(f64, usize, Weights)>,
    report: FitReport,
    truncation: TruncationStats,
    seed: u64,
    stage: &str,
    scaler: Option<MinMaxScaler>,
) -> StageResult {
    let retained: Vec<Checkpoint> = retained
        .into_iter()
        .map(|(val_loss, epoch, w)| Checkpoint {
            params: w.params,
            adapter: w.adapter,
            meta: CheckpointMeta { seed, epoch, val_loss: Some(val_loss), stage: stage.to_string() },
            scaler: scaler.clone(),
        })
        .collect();
    StageResult { checkpoint: retained[0].clone(), retained, report, truncation }
}

/// Full-model causal LM training from `init` (used for the teacher and for
/// the no-distillation baseline).
pub fn train_clm(
    init: &Checkpoint,
    corpus: &[AminoAcidSequence],
    cfg: &TrainConfig,
    max_len: usize,
) -> Result<StageResult> {
    let (examples, stats) = lm_examples(corpus, example_len(&init.params.config, max_len))?;
    let (tr, va) = split_indices(examples.len(), cfg.val_fraction, cfg.seed)?;
    let weights = Weights { params: init.params.clone(), adapter: None };
    let out = fit(weights, Trainable::Base, &pick(&examples, &tr), &pick(&examples, &va), &Objective::Clm, cfg)?;
    Ok(finish(out.retained, out.report, stats, cfg.seed, "clm", None))
}

/// Train a freshly initialized student against a teacher's soft targets.
pub fn train_distill(
    teacher: TeacherSource,
    student: &ModelConfig,
    corpus: &[AminoAcidSequence],
    cfg: &TrainConfig,
    dcfg: &DistillConfig,
    max_len: usize,
) -> Result<StageResult> {
    dcfg.validate()?;
    if teacher.vocab() != student.vocab_size {
        return Err(Error::Config(format!(
            "teacher vocabulary ({}) differs from student vocabulary ({})",
            teacher.vocab(),
            student.vocab_size
        )));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyInput("distillation corpus is empty".into()));
    }
    let len = match &teacher {
        TeacherSource::Model(t) => example_len(student, max_len).min(t.params.config.context_len),
        TeacherSource::Logits(_) => example_len(student, max_len),
    };
    let (examples, stats) = lm_examples(corpus, len)?;
    let logits = teacher.resolve(&examples)?;
    let (tr, va) = split_indices(examples.len(), cfg.val_fraction, cfg.seed)?;
    let t_train: Vec<Array2<f32>> = pick(&logits.examples, &tr);
    let t_val: Vec<Array2<f32>> = pick(&logits.examples, &va);
    let params = init_model(student, cfg.seed)?;
    let objective = Objective::Distill { cfg: *dcfg, train: &t_train, val: &t_val };
    let out = fit(
        Weights { params, adapter: None },
        Trainable::Base,
        &pick(&examples, &tr),
        &pick(&examples, &va),
        &objective,
        cfg,
    )?;
    Ok(finish(out.retained, out.report, stats, cfg.seed, "distill", None))
}

/// Base weights with any existing adapter folded in.
fn merged_base(ck: &Checkpoint) -> Result<crate::model::Params<f32>> {
    match &ck.adapter {
        Some(a) => merge_lora(&ck.params, a),
        None => Ok(ck.params.clone()),
    }
}

/// LoRA-only causal LM fine-tuning on repeat regions.
pub fn train_level1(
    student: &Checkpoint,
    repeats: &[AminoAcidSequence],
    cfg: &TrainConfig,
    lora: &LoraConfig,
    max_len: usize,
) -> Result<StageResult> {
    let params = merged_base(student)?;
    let adapter = attach_lora(&params, lora, cfg.seed)?;
    let (examples, stats) = lm_examples(repeats, example_len(&params.config, max_len))?;
    let (tr, va) = split_indices(examples.len(), cfg.val_fraction, cfg.seed)?;
    let out = fit(
        Weights { params, adapter: Some(adapter) },
        Trainable::Adapter,
        &pick(&examples, &tr),
        &pick(&examples, &va),
        &Objective::Clm,
        cfg,
    )?;
    Ok(finish(out.retained, out.report, stats, cfg.seed, "level1", None))
}

/// Both direction-tagged examples for each record.
pub fn bidirectional_examples(
    records: &[LabeledRecord],
    scaler: &MinMaxScaler,
    max_len: usize,
) -> Result<(Vec<EncodedExample>, TruncationStats)> {
    let mut stats = TruncationStats::default();
    let mut out = Vec::with_capacity(2 * records.len());
    for r in records {
        let v = scaler.apply(&r.properties)?;
        for d in [Direction::Generate, Direction::Estimate] {
            let e = build_example(d, &r.sequence, &v, max_len)?;
            stats.record(&e);
            out.push(e);
        }
    }
    Ok((out, stats))
}

/// One cross-validation run of the property stage.
pub struct FoldRun {
    pub fold: usize,
    pub result: StageResult,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Options for the property stage beyond the shared training config.
#[derive(Debug, Clone, PartialEq)]
pub struct Level2Options {
    /// Targets missing from a continued level-1 adapter are added fresh with its rank.
    pub lora: LoraConfig,
    /// Start each run from a fresh adapter instead of the level-1 one.
    pub reinit_adapter: bool,
    pub max_len: usize,
}

/// Bidirectional LoRA fine-tuning, one run per selected fold. The scaler is
/// fitted on all records and stored in every checkpoint.
pub fn train_level2(
    level1: &Checkpoint,
    records: &[LabeledRecord],
    cfg: &TrainConfig,
    opts: &Level2Options,
    plan: &FoldPlan,
) -> Result<Vec<FoldRun>> {
    if plan.n_records() != records.len() {
        return Err(Error::Config(format!(
            "fold plan covers {} records, dataset has {}",
            plan.n_records(),
            records.len()
        )));
    }
    let scaler = MinMaxScaler::fit_records(records)?;
    let max_len = example_len(&level1.params.config, opts.max_len);
    let mut runs = Vec::with_capacity(plan.selected.len());
    for run in 0..plan.selected.len() {
        let (train_idx, val_idx) = plan.split(run);
        let (train, stats) = bidirectional_examples(&pick(records, &train_idx), &scaler, max_len)?;
        let (val, _) = bidirectional_examples(&pick(records, &val_idx), &scaler, max_len)?;
        let seed = cfg.seed.wrapping_add(run as u64);
        let (params, adapter) = match (&level1.adapter, opts.reinit_adapter) {
            (Some(a), false) => {
                let a = extend_lora(a, &level1.params, &opts.lora.targets, seed)?;
                (level1.params.clone(), a)
            }
            _ => {
                let params = merged_base(level1)?;
                let a = attach_lora(&params, &opts.lora, seed)?;
                (params, a)
            }
        };
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let out = fit(Weights { params, adapter: Some(adapter) }, Trainable::Adapter, &train, &val, &Objective::Clm, &run_cfg)?;
        let result = finish(out.retained, out.report, stats, seed, "level2", Some(scaler.clone()));
        runs.push(FoldRun { fold: plan.selected[run], result, train_indices: train_idx, val_indices: val_idx });
    }
    Ok(runs)
}

/// Normalized property vector for `seq` via bin-constrained greedy decoding.
pub fn predict_properties(model: &Checkpoint, seq: &AminoAcidSequence, max_len: usize) -> Result<PropertyVector> {
    let room = example_len(&model.params.config, max_len)
        .checked_sub(CONDITIONED_OVERHEAD)
        .filter(|&r| r > 0)
        .ok_or_else(|| Error::Config("context too short for property estimation".into()))?;
    let seq = seq.slice(0, seq.len().min(room));
    let prompt = estimate_prompt(&seq);
    let bins = sample(&model.params, model.adapter.as_ref(), &prompt, &SamplingConfig::greedy(), Constraint::property_bins(), 0)?;
    decode_property_tokens(&bins)
}

/// Sample a sequence conditioned on a normalized property vector.
pub fn generate_sequence(
    model: &Checkpoint,
    v: &PropertyVector,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<AminoAcidSequence> {
    let prompt = generate_prompt(v)?;
    sample_residues(model, &prompt, sampling, seed)
}

/// Sample a sequence from the `[EOS]` start prompt.
pub fn generate_unconditional(model: &Checkpoint, sampling: &SamplingConfig, seed: u64) -> Result<AminoAcidSequence> {
    sample_residues(model, &unconditional_prompt(), sampling, seed)
}

fn sample_residues(model: &Checkpoint, prompt: &[u32], sampling: &SamplingConfig, seed: u64) -> Result<AminoAcidSequence> {
    let ids = sample(&model.params, model.adapter.as_ref(), prompt, sampling, Constraint::Residues, seed)?;
    let text = decode_tokens(&ids)?;
    if text.is_empty() {
        return Err(Error::Generation("model emitted EOS before any residue".into()));
    }
    AminoAcidSequence::new(&text)
}
