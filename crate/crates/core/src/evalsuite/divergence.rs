use crate::error::{Error, Result};
use crate::seqdata::{AminoAcidSequence, BackgroundDistribution};

/// Pseudo-count added to every symbol before renormalizing.
pub const KL_SMOOTHING: f64 = 1e-9;

fn smooth(p: &[f64; 20]) -> [f64; 20] {
    let total: f64 = p.iter().map(|x| x + KL_SMOOTHING).sum();
    p.map(|x| (x + KL_SMOOTHING) / total)
}

/// `Σ P(i)·log₂(P(i)/Q(i))` in bits, after smoothing both sides.
pub fn kl_bits(p: &[f64; 20], q: &[f64; 20]) -> f64 {
    let (p, q) = (smooth(p), smooth(q));
    p.iter().zip(&q).map(|(a, b)| a * (a / b).log2()).sum()
}

/// Divergence of a composition from a background distribution, in bits.
pub fn kl_divergence(p: &[f64; 20], q: &BackgroundDistribution) -> f64 {
    kl_bits(p, &q.probs)
}

pub fn sequence_kl(seq: &AminoAcidSequence, q: &BackgroundDistribution) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("KL divergence of an empty sequence".into()));
    }
    Ok(kl_divergence(&seq.composition(), q))
}

/// Number of mismatching positions between equal-length sequences.
pub fn hamming_distance(a: &AminoAcidSequence, b: &AminoAcidSequence) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Length(format!("hamming distance needs equal lengths, got {} and {}", a.len(), b.len())));
    }
    Ok(a.as_bytes().iter().zip(b.as_bytes()).filter(|(x, y)| x != y).count())
}
