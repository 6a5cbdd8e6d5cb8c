use std::sync::OnceLock;

use regex::bytes::Regex;
use serde::{Deserialize, Serialize};

use crate::seqdata::AminoAcidSequence;

/// The seven repeat motifs tracked in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motif {
    #[serde(rename = "YGQGG")]
    Ygqgg,
    #[serde(rename = "polyA")]
    PolyA,
    #[serde(rename = "GGX")]
    Ggx,
    #[serde(rename = "QQ")]
    Qq,
    #[serde(rename = "GPGXX")]
    Gpgxx,
    #[serde(rename = "AGQG")]
    Agqg,
    #[serde(rename = "SV")]
    Sv,
}

impl Motif {
    pub const ALL: [Motif; 7] = [Motif::Ygqgg, Motif::PolyA, Motif::Ggx, Motif::Qq, Motif::Gpgxx, Motif::Agqg, Motif::Sv];

    pub fn name(self) -> &'static str {
        match self {
            Motif::Ygqgg => "YGQGG",
            Motif::PolyA => "polyA",
            Motif::Ggx => "GGX",
            Motif::Qq => "QQ",
            Motif::Gpgxx => "GPGXX",
            Motif::Agqg => "AGQG",
            Motif::Sv => "SV",
        }
    }

    pub fn pattern(self) -> &'static str {
        match self {
            Motif::Ygqgg => "YGQGG",
            Motif::PolyA => "A{3,}",
            Motif::Ggx => "GG[A-Z]",
            Motif::Qq => "QQ",
            Motif::Gpgxx => "GPG[A-Z]{2}",
            Motif::Agqg => "AGQG",
            Motif::Sv => "SV",
        }
    }

    fn regex(self) -> &'static Regex {
        static CELLS: [OnceLock<Regex>; 7] = [const { OnceLock::new() }; 7];
        CELLS[self as usize].get_or_init(|| Regex::new(self.pattern()).expect("static motif pattern"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotifStat {
    pub motif: Motif,
    pub count: usize,
    /// Matched characters over sequence length.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifReport {
    pub length: usize,
    pub motifs: Vec<MotifStat>,
}

impl MotifReport {
    pub fn get(&self, m: Motif) -> Option<&MotifStat> {
        self.motifs.iter().find(|s| s.motif == m)
    }

    /// Counts then coverages, in [`Motif::ALL`] order.
    pub fn features(&self) -> [f64; 14] {
        let mut f = [0.0; 14];
        for (i, m) in Motif::ALL.iter().enumerate() {
            let s = self.get(*m).expect("full report");
            f[i] = s.count as f64;
            f[7 + i] = s.coverage;
        }
        f
    }
}

/// Names of the 14 values returned by [`MotifReport::features`].
pub fn feature_names() -> Vec<String> {
    let counts = Motif::ALL.iter().map(|m| format!("{}_count", m.name()));
    let covs = Motif::ALL.iter().map(|m| format!("{}_coverage", m.name()));
    counts.chain(covs).collect()
}

/// Non-overlapping left-to-right scan of one motif: `(count, matched chars)`.
pub fn scan_motif(seq: &[u8], motif: Motif) -> (usize, usize) {
    motif
        .regex()
        .find_iter(seq)
        .fold((0, 0), |(n, chars), m| (n + 1, chars + m.len()))
}

pub fn count_motifs_in(seq: &AminoAcidSequence, motifs: &[Motif]) -> MotifReport {
    let len = seq.len();
    let motifs = motifs
        .iter()
        .map(|&motif| {
            let (count, chars) = scan_motif(seq.as_bytes(), motif);
            let coverage = if len == 0 { 0.0 } else { chars as f64 / len as f64 };
            MotifStat { motif, count, coverage }
        })
        .collect();
    MotifReport { length: len, motifs }
}

pub fn count_motifs(seq: &AminoAcidSequence) -> MotifReport {
    count_motifs_in(seq, &Motif::ALL)
}
