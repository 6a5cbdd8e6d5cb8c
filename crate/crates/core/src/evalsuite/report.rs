use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalsuite::divergence::{kl_bits, kl_divergence};
use crate::evalsuite::motifs::{count_motifs, feature_names, Motif, MotifReport};
use crate::evalsuite::physchem::{physchem, PhysChemReport};
use crate::evalsuite::stats::{ks_two_sample, KsResult, TrendMetrics, TrendReport};
use crate::evalsuite::validity::{repeat_validity, Validity};
use crate::seqdata::{AminoAcidSequence, BackgroundDistribution, FastaRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub id: String,
    pub physchem: PhysChemReport,
    pub motifs: MotifReport,
    pub kl_bits: f64,
    /// `None` when the sequence is shorter than the window.
    pub validity: Option<Validity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub n: usize,
    pub mean_length: f64,
    pub mean_molecular_weight: f64,
    pub mean_isoelectric_point: f64,
    pub mean_instability_index: Option<f64>,
    pub mean_kl_bits: f64,
    /// KL of the pooled composition against the background.
    pub pooled_kl_bits: f64,
    pub mean_helix: f64,
    pub mean_sheet: f64,
    pub mean_other: f64,
    /// Share of sequences judged `valid` (too-short ones count as invalid).
    pub valid_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub n_reference: usize,
    /// KS test of per-sequence motif coverage, by motif.
    pub coverage_ks: Vec<(String, KsResult)>,
    pub length_ks: KsResult,
    /// KL of the pooled composition against the pooled reference composition.
    pub pooled_kl_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub window: usize,
    pub threshold: f64,
    pub summary: SetSummary,
    pub reference: Option<ReferenceComparison>,
    pub sequences: Vec<SequenceReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub window: usize,
    pub threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { window: super::validity::DEFAULT_WINDOW, threshold: super::validity::DEFAULT_THRESHOLD }
    }
}

pub fn pooled_composition<'a>(seqs: impl IntoIterator<Item = &'a AminoAcidSequence>) -> [f64; 20] {
    let mut counts = [0usize; 20];
    for s in seqs {
        for (c, k) in counts.iter_mut().zip(s.counts()) {
            *c += k;
        }
    }
    let total = counts.iter().sum::<usize>().max(1) as f64;
    counts.map(|c| c as f64 / total)
}

pub fn evaluate_sequence(id: &str, seq: &AminoAcidSequence, bg: &BackgroundDistribution, opts: &EvalOptions) -> Result<SequenceReport> {
    let validity = match repeat_validity(seq, opts.window, opts.threshold) {
        Ok(r) => Some(r.validity),
        Err(Error::Config(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SequenceReport {
        id: id.to_string(),
        physchem: physchem(seq)?,
        motifs: count_motifs(seq),
        kl_bits: kl_divergence(&seq.composition(), bg),
        validity,
    })
}

/// Coverage of each motif across a set, one vector per motif.
pub fn coverage_columns(seqs: &[&AminoAcidSequence]) -> Vec<Vec<f64>> {
    let reports: Vec<MotifReport> = seqs.iter().map(|s| count_motifs(s)).collect();
    Motif::ALL
        .iter()
        .map(|&m| reports.iter().map(|r| r.get(m).expect("full report").coverage).collect())
        .collect()
}

pub fn compare_to_reference(set: &[&AminoAcidSequence], reference: &[&AminoAcidSequence]) -> Result<ReferenceComparison> {
    let a = coverage_columns(set);
    let b = coverage_columns(reference);
    let coverage_ks = Motif::ALL
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(m, (x, y))| Ok((m.name().to_string(), ks_two_sample(x, y)?)))
        .collect::<Result<Vec<_>>>()?;
    let len = |s: &[&AminoAcidSequence]| s.iter().map(|x| x.len() as f64).collect::<Vec<_>>();
    Ok(ReferenceComparison {
        n_reference: reference.len(),
        coverage_ks,
        length_ks: ks_two_sample(&len(set), &len(reference))?,
        pooled_kl_bits: kl_bits(&pooled_composition(set.iter().copied()), &pooled_composition(reference.iter().copied())),
    })
}

pub fn evaluate_records(
    records: &[FastaRecord],
    reference: Option<&[FastaRecord]>,
    bg: &BackgroundDistribution,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no sequences to evaluate".into()));
    }
    let sequences = records
        .iter()
        .map(|r| evaluate_sequence(r.id(), &r.sequence, bg, opts))
        .collect::<Result<Vec<_>>>()?;
    let n = sequences.len() as f64;
    let avg = |f: &dyn Fn(&SequenceReport) -> f64| sequences.iter().map(f).sum::<f64>() / n;
    let inst: Vec<f64> = sequences.iter().filter_map(|s| s.physchem.instability_index).collect();
    let summary = SetSummary {
        n: sequences.len(),
        mean_length: avg(&|s| s.physchem.length as f64),
        mean_molecular_weight: avg(&|s| s.physchem.molecular_weight),
        mean_isoelectric_point: avg(&|s| s.physchem.isoelectric_point),
        mean_instability_index: (!inst.is_empty()).then(|| inst.iter().sum::<f64>() / inst.len() as f64),
        mean_kl_bits: avg(&|s| s.kl_bits),
        pooled_kl_bits: kl_divergence(&pooled_composition(records.iter().map(|r| &r.sequence)), bg),
        mean_helix: avg(&|s| s.physchem.helix),
        mean_sheet: avg(&|s| s.physchem.sheet),
        mean_other: avg(&|s| s.physchem.other),
        valid_fraction: avg(&|s| s.validity.is_some_and(Validity::is_valid) as u8 as f64),
    };
    let reference = match reference {
        Some(r) if r.is_empty() => return Err(Error::EmptyInput("reference set is empty".into())),
        Some(r) => {
            let set: Vec<&AminoAcidSequence> = records.iter().map(|x| &x.sequence).collect();
            let refs: Vec<&AminoAcidSequence> = r.iter().map(|x| &x.sequence).collect();
            Some(compare_to_reference(&set, &refs)?)
        }
        None => None,
    };
    Ok(EvaluationReport { window: opts.window, threshold: opts.threshold, summary, reference, sequences })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EvaluationReport {
    /// One row per sequence.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "id\tlength\tmolecular_weight\tisoelectric_point\tinstability_index\tkl_bits\thelix\tsheet\tother\tvalidity",
        );
        for name in feature_names() {
            write!(out, "\t{name}").expect("string write");
        }
        out.push('\n');
        for s in &self.sequences {
            let p = &s.physchem;
            write!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
                s.id,
                p.length,
                p.molecular_weight,
                p.isoelectric_point,
                opt(p.instability_index),
                s.kl_bits,
                p.helix,
                p.sheet,
                p.other,
                s.validity.map_or("too-short", Validity::as_str),
            )
            .expect("string write");
            let f = s.motifs.features();
            for v in &f[..7] {
                write!(out, "\t{v}").expect("string write");
            }
            for v in &f[7..] {
                write!(out, "\t{v:.6}").expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

impl TrendReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("scope\tpearson\tspearman\tmae\trmse\tr2\tcosine\n");
        let mut row = |scope: &str, m: &TrendMetrics| {
            writeln!(
                out,
                "{scope}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                opt(m.pearson),
                opt(m.spearman),
                m.mae,
                m.rmse,
                opt(m.r2),
                opt(m.cosine)
            )
            .expect("string write");
        };
        row("overall", &self.overall);
        for (name, m) in &self.per_property {
            row(name, m);
        }
        out
    }
}
