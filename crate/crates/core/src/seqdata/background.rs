use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{AminoAcidSequence, ALPHABET};

/// Reference residue distribution used as `Q` in KL-divergence reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundDistribution {
    /// Probabilities in [`ALPHABET`] order.
    pub probs: [f64; 20],
}

/// Mean residue frequencies of MaSp repeat regions (A, R, N, ... V).
pub const MASP_REPEAT_BACKGROUND: [f64; 20] = [
    0.2232, // A
    0.0129, // R
    0.0070, // N
    0.0078, // D
    0.0002, // C
    0.0850, // Q
    0.0069, // E
    0.3766, // G
    0.0003, // H
    0.0050, // I
    0.0138, // L
    0.0017, // K
    0.0014, // M
    0.0038, // F
    0.0788, // P
    0.1004, // S
    0.0123, // T
    0.0002, // W
    0.0485, // Y
    0.0141, // V
];

impl BackgroundDistribution {
    pub fn builtin() -> Self {
        Self { probs: MASP_REPEAT_BACKGROUND }
    }

    pub fn prob(&self, residue: u8) -> Option<f64> {
        crate::seqdata::residue_index(residue).map(|i| self.probs[i])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Read a two-column `residue<TAB>probability` table.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut probs = [f64::NAN; 20];
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let mut parts = line.split('\t');
            let (Some(res), Some(p)) = (parts.next(), parts.next()) else {
                return Err(Error::Format(format!("bad background line '{line}'")));
            };
            let idx = res
                .as_bytes()
                .first()
                .and_then(|&b| crate::seqdata::residue_index(b))
                .filter(|_| res.len() == 1)
                .ok_or_else(|| Error::Format(format!("unknown residue '{res}'")))?;
            probs[idx] = p
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad probability '{p}'")))?;
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Format(format!("missing or invalid probability for {}", ALPHABET[i] as char)));
        }
        let d = Self { probs };
        if (d.total() - 1.0).abs() > 1e-3 {
            return Err(Error::Format(format!("background sums to {}", d.total())));
        }
        Ok(d)
    }
}

/// Pooled residue frequencies over a corpus.
pub fn background_frequencies<'a, I>(corpus: I) -> Result<BackgroundDistribution>
where
    I: IntoIterator<Item = &'a AminoAcidSequence>,
{
    let mut counts = [0usize; 20];
    for seq in corpus {
        for (c, n) in counts.iter_mut().zip(seq.counts()) {
            *c += n;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("background corpus has no residues".into()));
    }
    Ok(BackgroundDistribution { probs: counts.map(|c| c as f64 / total as f64) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_key_values() {
        let b = BackgroundDistribution::builtin();
        assert_eq!(b.prob(b'G'), Some(0.3766));
        assert_eq!(b.prob(b'A'), Some(0.2232));
        assert!((b.total() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn pooled_frequencies() {
        let corpus = [AminoAcidSequence::new("AG").unwrap(), AminoAcidSequence::new("GA").unwrap()];
        let b = background_frequencies(&corpus).unwrap();
        assert_eq!(b.prob(b'A'), Some(0.5));
        assert_eq!(b.prob(b'G'), Some(0.5));
        assert_eq!(b.prob(b'Y'), Some(0.0));
    }

    #[test]
    fn empty_corpus() {
        let corpus: [AminoAcidSequence; 0] = [];
        assert!(matches!(background_frequencies(&corpus), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn tsv_table() {
        let text: String = ALPHABET
            .iter()
            .zip(MASP_REPEAT_BACKGROUND)
            .map(|(&r, p)| format!("{}\t{p}\n", r as char))
            .collect();
        assert_eq!(BackgroundDistribution::parse_tsv(&text).unwrap(), BackgroundDistribution::builtin());
        assert!(BackgroundDistribution::parse_tsv("A\t1.0\n").is_err());
    }
}
