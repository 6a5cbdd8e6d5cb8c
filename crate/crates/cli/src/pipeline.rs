//! Stage drivers shared by the subcommands.

use serde::Serialize;
use silkforge::evalsuite::{compare_to_reference, repeat_validity, trend_metrics, TrendReport};
use silkforge::model::{init_model, Checkpoint, SamplingConfig};
use silkforge::seqdata::{
    make_folds, AminoAcidSequence, FastaRecord, LabeledRecord, PropertyVector, MEAN_PROPERTIES, PROPERTY_NAMES,
};
use silkforge::train::{
    generate_sequence, generate_unconditional, predict_properties, train_clm, train_distill, train_level1,
    train_level2, FoldRun, Level2Options, StageResult, TeacherLogits, TeacherSource,
};
use silkforge::{Error, Result};

use crate::config::RunConfig;

pub struct DistillRun {
    /// Present when the teacher was trained here.
    pub teacher: Option<StageResult>,
    pub student: StageResult,
}

/// Teacher (trained locally unless supplied) followed by student distillation.
pub fn distill(cfg: &RunConfig, corpus: &[AminoAcidSequence]) -> Result<DistillRun> {
    let student = cfg.model.student.resolve()?;
    let max_len = cfg.tokenizer.max_len;
    let loss = cfg.distill.loss();
    if let Some(path) = &cfg.distill.teacher_logits {
        let logits = TeacherLogits::load(path)?;
        let out = train_distill(TeacherSource::Logits(logits), &student, corpus, &cfg.distill.train, &loss, max_len)?;
        return Ok(DistillRun { teacher: None, student: out });
    }
    let (teacher_ck, trained) = match &cfg.distill.teacher_checkpoint {
        Some(path) => (silkforge::model::load_checkpoint(path)?, None),
        None => {
            let init = Checkpoint::new(init_model(&cfg.model.teacher.resolve()?, cfg.distill.teacher_train.seed)?);
            let run = train_clm(&init, corpus, &cfg.distill.teacher_train, max_len)?;
            (run.checkpoint.clone(), Some(run))
        }
    };
    let out = train_distill(TeacherSource::Model(&teacher_ck), &student, corpus, &cfg.distill.train, &loss, max_len)?;
    Ok(DistillRun { teacher: trained, student: out })
}

/// Full student training on the corpus without a teacher.
pub fn train_undistilled(cfg: &RunConfig, corpus: &[AminoAcidSequence]) -> Result<StageResult> {
    let init = Checkpoint::new(init_model(&cfg.model.student.resolve()?, cfg.distill.train.seed)?);
    train_clm(&init, corpus, &cfg.distill.train, cfg.tokenizer.max_len)
}

pub fn level1(cfg: &RunConfig, student: &Checkpoint, repeats: &[AminoAcidSequence]) -> Result<StageResult> {
    train_level1(student, repeats, &cfg.level1.train, &cfg.level1.lora, cfg.tokenizer.max_len)
}

pub fn level2(
    cfg: &RunConfig,
    start: &Checkpoint,
    records: &[LabeledRecord],
    folds: usize,
    select: usize,
    reinit_adapter: bool,
) -> Result<Vec<FoldRun>> {
    let plan = make_folds(records.len(), folds, select, cfg.level2.fold_seed)?;
    let opts = Level2Options { lora: cfg.level2.lora.clone(), reinit_adapter, max_len: cfg.tokenizer.max_len };
    train_level2(start, records, &cfg.level2.train, &opts, &plan)
}

/// Normalized predictions against normalized truth on every held-out record.
#[derive(Debug, Clone, Serialize)]
pub struct HeldOut {
    pub ids: Vec<String>,
    pub predicted: Vec<PropertyVector>,
    pub reference: Vec<PropertyVector>,
}

impl HeldOut {
    /// Trend metrics over the four mean properties.
    pub fn trend(&self) -> Result<TrendReport> {
        let pick = |v: &PropertyVector| {
            let a = v.to_array();
            MEAN_PROPERTIES.iter().map(|&k| a[k]).collect::<Vec<f64>>()
        };
        let pred: Vec<Vec<f64>> = self.predicted.iter().map(pick).collect();
        let reference: Vec<Vec<f64>> = self.reference.iter().map(pick).collect();
        let cols: Vec<String> = MEAN_PROPERTIES.iter().map(|&k| PROPERTY_NAMES[k].to_string()).collect();
        trend_metrics(&pred, &reference, &cols)
    }

    /// Pearson r of one property column.
    pub fn pearson(&self, property: usize) -> Option<f64> {
        let col = |vs: &[PropertyVector]| vs.iter().map(|v| v.to_array()[property]).collect::<Vec<f64>>();
        silkforge::evalsuite::pearson(&col(&self.predicted), &col(&self.reference))
    }
}

pub fn held_out(runs: &[FoldRun], records: &[LabeledRecord], max_len: usize) -> Result<HeldOut> {
    let mut out = HeldOut { ids: vec![], predicted: vec![], reference: vec![] };
    for run in runs {
        let ck = &run.result.checkpoint;
        let scaler = ck.scaler.as_ref().ok_or_else(|| Error::State("level-2 checkpoint has no scaler".into()))?;
        for &i in &run.val_indices {
            let r = &records[i];
            out.ids.push(r.id.clone());
            out.predicted.push(predict_properties(ck, &r.sequence, max_len)?);
            out.reference.push(scaler.apply(&r.properties)?);
        }
    }
    Ok(out)
}

fn sample_id(prefix: &str, i: usize) -> String {
    format!("{prefix}{:04}", i + 1)
}

/// Samples drawn for one request. Generations that stop before any residue
/// are counted rather than kept.
#[derive(Debug, Clone, Default)]
pub struct Sampled {
    pub records: Vec<FastaRecord>,
    pub empty: usize,
}

impl Sampled {
    pub fn requested(&self) -> usize {
        self.records.len() + self.empty
    }

    /// Fails on the first empty generation.
    pub fn complete(self) -> Result<Vec<FastaRecord>> {
        if self.empty > 0 {
            return Err(Error::Generation(format!("{} of {} samples were empty", self.empty, self.requested())));
        }
        Ok(self.records)
    }

    pub fn extend(&mut self, other: Sampled) {
        self.records.extend(other.records);
        self.empty += other.empty;
    }
}

fn collect_samples(prefix: &str, n: usize, draw: impl Fn(usize) -> Result<AminoAcidSequence>) -> Result<Sampled> {
    let mut out = Sampled::default();
    for i in 0..n {
        match draw(i) {
            Ok(s) => out.records.push(FastaRecord::new(sample_id(prefix, i), s)),
            Err(Error::Generation(_)) => out.empty += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `n` unconditional samples with seeds `seed, seed+1, ...`.
pub fn sample_unconditional(ck: &Checkpoint, sampling: &SamplingConfig, n: usize, seed: u64) -> Result<Sampled> {
    collect_samples("sample", n, |i| generate_unconditional(ck, sampling, seed.wrapping_add(i as u64)))
}

/// `n` samples conditioned on a normalized vector.
pub fn sample_conditioned(
    ck: &Checkpoint,
    v: &PropertyVector,
    sampling: &SamplingConfig,
    n: usize,
    seed: u64,
) -> Result<Sampled> {
    collect_samples("gen", n, |i| generate_sequence(ck, v, sampling, seed.wrapping_add(i as u64)))
}

/// Share of sequences judged valid; too-short ones count as invalid.
pub fn valid_fraction(seqs: &[&AminoAcidSequence], window: usize, threshold: f64) -> f64 {
    if seqs.is_empty() {
        return 0.0;
    }
    let ok = seqs
        .iter()
        .filter(|s| repeat_validity(s, window, threshold).is_ok_and(|r| r.validity.is_valid()))
        .count();
    ok as f64 / seqs.len() as f64
}

/// Sample quality of one model against a reference set.
#[derive(Debug, Clone, Serialize)]
pub struct SampleQuality {
    /// Requested samples, including empty ones.
    pub n: usize,
    pub empty: usize,
    /// Share of requested samples judged valid.
    pub valid_fraction: f64,
    /// Per-motif coverage KS p-values, in motif order; empty when nothing was generated.
    pub coverage_ks_p: Vec<(String, f64)>,
    pub min_ks_p: f64,
}

pub fn sample_quality(
    samples: &Sampled,
    reference: &[AminoAcidSequence],
    window: usize,
    threshold: f64,
) -> Result<SampleQuality> {
    let seqs: Vec<&AminoAcidSequence> = samples.records.iter().map(|r| &r.sequence).collect();
    let n = samples.requested();
    let coverage_ks_p: Vec<(String, f64)> = if seqs.is_empty() {
        Vec::new()
    } else {
        let refs: Vec<&AminoAcidSequence> = reference.iter().collect();
        compare_to_reference(&seqs, &refs)?.coverage_ks.iter().map(|(m, k)| (m.clone(), k.p_value)).collect()
    };
    let min_ks_p = if seqs.is_empty() { 0.0 } else { coverage_ks_p.iter().map(|(_, p)| *p).fold(1.0, f64::min) };
    let valid = if n == 0 { 0.0 } else { valid_fraction(&seqs, window, threshold) * seqs.len() as f64 / n as f64 };
    Ok(SampleQuality { n, empty: samples.empty, valid_fraction: valid, coverage_ks_p, min_ks_p })
}
