use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::AminoAcidSequence;

pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    Valid,
    PrefixFlagged,
    SuffixFlagged,
    Both,
}

impl Validity {
    pub fn is_valid(self) -> bool {
        self == Validity::Valid
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Validity::Valid => "valid",
            Validity::PrefixFlagged => "prefix-flagged",
            Validity::SuffixFlagged => "suffix-flagged",
            Validity::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub validity: Validity,
    /// Windows in the flagged leading block.
    pub prefix_windows: usize,
    /// Windows in the flagged trailing block.
    pub suffix_windows: usize,
    pub min_density: f64,
}

/// Combined A+G density of every length-`window` window.
pub fn window_densities(seq: &[u8], window: usize) -> Vec<f64> {
    let is_ag = |c: &u8| (*c == b'A' || *c == b'G') as usize;
    let mut run: usize = seq[..window].iter().map(is_ag).sum();
    let mut out = Vec::with_capacity(seq.len() - window + 1);
    out.push(run as f64 / window as f64);
    for i in window..seq.len() {
        run = run + is_ag(&seq[i]) - is_ag(&seq[i - window]);
        out.push(run as f64 / window as f64);
    }
    out
}

/// Flags leading and trailing stretches whose windows fall below
/// `threshold` A+G density.
pub fn repeat_validity(seq: &AminoAcidSequence, window: usize, threshold: f64) -> Result<ValidityReport> {
    if window == 0 || window > seq.len() {
        return Err(Error::Config(format!("window {window} does not fit a sequence of length {}", seq.len())));
    }
    let d = window_densities(seq.as_bytes(), window);
    let prefix = d.iter().take_while(|&&x| x < threshold).count();
    let suffix = d.iter().rev().take_while(|&&x| x < threshold).count();
    let validity = match (prefix > 0, suffix > 0) {
        (false, false) => Validity::Valid,
        (true, false) => Validity::PrefixFlagged,
        (false, true) => Validity::SuffixFlagged,
        (true, true) => Validity::Both,
    };
    let min_density = d.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ValidityReport { validity, prefix_windows: prefix, suffix_windows: suffix, min_density })
}
