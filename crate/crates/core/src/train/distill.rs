use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autograd::{softmax_row, soft_kl, Real};
use crate::error::{Error, Result};
use crate::model::{forward, shifted_targets, Checkpoint};
use crate::seqdata::uniprot::write_atomic;
use crate::tokenizer::{EncodedExample, TokenId};

/// `L = α·CE + (1−α)·T²·KL(teacher_T ‖ student_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    pub temperature: f64,
    pub alpha: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { temperature: 10.0, alpha: 0.1 }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature {} must be positive", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Components of the distillation loss, each averaged over masked positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillTerms {
    pub hard: f64,
    pub kl: f64,
    pub total: f64,
}

pub fn distill_loss<F: Real>(
    student: &Array2<F>,
    teacher: &Array2<F>,
    ids: &[TokenId],
    mask: &[u8],
    cfg: &DistillConfig,
) -> Result<DistillTerms> {
    cfg.validate()?;
    if student.dim() != teacher.dim() {
        return Err(Error::Config(format!(
            "student logits {:?} and teacher logits {:?} differ in shape",
            student.dim(),
            teacher.dim()
        )));
    }
    if student.nrows() != ids.len() || mask.len() != ids.len() {
        return Err(Error::Length("logits, ids and mask disagree in length".into()));
    }
    let (targets, weights, active) = shifted_targets::<F>(&[(ids, mask)]);
    if active == 0 {
        return Err(Error::EmptyMask);
    }
    let v = student.ncols();
    let (mut p, mut ps, mut pt) = (vec![F::zero(); v], vec![F::zero(); v], vec![F::zero(); v]);
    let (mut hard, mut kl) = (0.0, 0.0);
    let t = F::of(cfg.temperature);
    for i in 0..ids.len() {
        if weights[i] == F::zero() {
            continue;
        }
        let row = student.row(i);
        hard += softmax_row(row, &mut p) - row[targets[i]].as_f64();
        kl += soft_kl(row, teacher.row(i), t, &mut ps, &mut pt);
    }
    let n = active as f64;
    let (hard, kl) = (hard / n, kl / n);
    let a = cfg.alpha;
    let total = a * hard + (1.0 - a) * cfg.temperature * cfg.temperature * kl;
    Ok(DistillTerms { hard, kl, total })
}

pub const LOGITS_MAGIC: &[u8; 4] = b"TLOG";

/// Per-example teacher logits `[len × vocab]`, aligned with a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherLogits {
    pub vocab: usize,
    pub examples: Vec<Array2<f32>>,
}

impl TeacherLogits {
    /// Eval-mode teacher logits over the real tokens of each example.
    pub fn from_model(teacher: &Checkpoint, examples: &[EncodedExample]) -> Result<Self> {
        let logits = examples
            .iter()
            .map(|e| forward(&teacher.params, e.real_ids(), teacher.adapter.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vocab: teacher.params.config.vocab_size, examples: logits })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(LOGITS_MAGIC);
        out.extend_from_slice(&(self.vocab as u32).to_le_bytes());
        out.extend_from_slice(&(self.examples.len() as u32).to_le_bytes());
        for e in &self.examples {
            out.extend_from_slice(&(e.nrows() as u32).to_le_bytes());
            for x in e.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != LOGITS_MAGIC {
            return Err(Error::Format("not a teacher logits file (bad magic)".into()));
        }
        let mut r = &bytes[4..];
        let mut u32_at = |what: &str| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| Error::Integrity(format!("logits file truncated reading {what}")))?;
            Ok(u32::from_le_bytes(b))
        };
        let vocab = u32_at("vocab size")? as usize;
        let count = u32_at("record count")? as usize;
        let mut examples = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let len = u32_at("record length")? as usize;
            let n = len * vocab;
            let mut data = vec![0f32; n];
            for x in data.iter_mut() {
                *x = f32::from_bits(u32_at(&format!("record {i}"))?);
            }
            examples.push(Array2::from_shape_vec((len, vocab), data).expect("sized"));
        }
        if !r.is_empty() {
            return Err(Error::Integrity("trailing bytes after last logits record".into()));
        }
        Ok(Self { vocab, examples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Where soft targets come from.
pub enum TeacherSource<'a> {
    Model(&'a Checkpoint),
    Logits(TeacherLogits),
}

impl TeacherSource<'_> {
    pub fn vocab(&self) -> usize {
        match self {
            TeacherSource::Model(c) => c.params.config.vocab_size,
            TeacherSource::Logits(l) => l.vocab,
        }
    }

    /// Teacher logits for each example, checked against the corpus.
    pub fn resolve(self, examples: &[EncodedExample]) -> Result<TeacherLogits> {
        let logits = match self {
            TeacherSource::Model(c) => TeacherLogits::from_model(c, examples)?,
            TeacherSource::Logits(l) => l,
        };
        if logits.examples.len() != examples.len() {
            return Err(Error::Config(format!(
                "teacher logits cover {} examples, corpus has {}",
                logits.examples.len(),
                examples.len()
            )));
        }
        for (i, (l, e)) in logits.examples.iter().zip(examples).enumerate() {
            if l.nrows() != e.len {
                return Err(Error::Config(format!("teacher logits for example {i} have {} rows, expected {}", l.nrows(), e.len)));
            }
        }
        Ok(logits)
    }
}
