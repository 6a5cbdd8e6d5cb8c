use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 20 standard residues, in the canonical order used throughout the crate
/// (composition vectors, background tables, vocabulary ids).
pub const ALPHABET: [u8; 20] = *b"ARNDCQEGHILKMFPSTWYV";

/// Index of `residue` in [`ALPHABET`], or `None` for anything else.
#[inline]
pub fn residue_index(residue: u8) -> Option<usize> {
    match residue {
        b'A' => Some(0),
        b'R' => Some(1),
        b'N' => Some(2),
        b'D' => Some(3),
        b'C' => Some(4),
        b'Q' => Some(5),
        b'E' => Some(6),
        b'G' => Some(7),
        b'H' => Some(8),
        b'I' => Some(9),
        b'L' => Some(10),
        b'K' => Some(11),
        b'M' => Some(12),
        b'F' => Some(13),
        b'P' => Some(14),
        b'S' => Some(15),
        b'T' => Some(16),
        b'W' => Some(17),
        b'Y' => Some(18),
        b'V' => Some(19),
        _ => None,
    }
}

/// A non-empty protein sequence over the 20-letter alphabet.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AminoAcidSequence(Vec<u8>);

impl AminoAcidSequence {
    /// Validates `residues`; `record` is only used to label errors.
    pub fn from_bytes(residues: &[u8], record: &str) -> Result<Self> {
        if residues.is_empty() {
            return Err(Error::Format(format!("record '{record}' has an empty sequence")));
        }
        if let Some((i, &b)) = residues
            .iter()
            .enumerate()
            .find(|(_, &b)| residue_index(b).is_none())
        {
            return Err(Error::Validation {
                record: record.to_string(),
                position: i + 1,
                symbol: b as char,
            });
        }
        Ok(Self(residues.to_vec()))
    }

    pub fn new(residues: &str) -> Result<Self> {
        Self::from_bytes(residues.as_bytes(), "<inline>")
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // Only ASCII residues are ever stored.
        std::str::from_utf8(&self.0).expect("ascii residues")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Residue counts in [`ALPHABET`] order.
    pub fn counts(&self) -> [usize; 20] {
        let mut counts = [0usize; 20];
        for &b in &self.0 {
            counts[residue_index(b).expect("validated")] += 1;
        }
        counts
    }

    /// Residue fractions in [`ALPHABET`] order.
    pub fn composition(&self) -> [f64; 20] {
        let n = self.0.len() as f64;
        self.counts().map(|c| c as f64 / n)
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.0.clone();
        v.reverse();
        Self(v)
    }

    /// Sub-range `[start, end)`. Panics on out-of-range or empty slices.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        assert!(start < end && end <= self.0.len(), "invalid slice {start}..{end}");
        Self(self.0[start..end].to_vec())
    }
}

impl TryFrom<String> for AminoAcidSequence {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(&value)
    }
}

impl From<AminoAcidSequence> for String {
    fn from(value: AminoAcidSequence) -> Self {
        value.as_str().to_string()
    }
}

impl fmt::Display for AminoAcidSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for AminoAcidSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AminoAcidSequence({})", self.as_str())
    }
}

/// N-terminal residues removed by [`extract_repeat_region`].
pub const N_TERMINAL_TRIM: usize = 150;
/// C-terminal residues removed by [`extract_repeat_region`].
pub const C_TERMINAL_TRIM: usize = 115;

/// Strip the terminal domains of a full-length spidroin, keeping
/// residues `[150, len - 115)`.
pub fn extract_repeat_region(seq: &AminoAcidSequence) -> Result<AminoAcidSequence> {
    let min = N_TERMINAL_TRIM + C_TERMINAL_TRIM;
    if seq.len() <= min {
        return Err(Error::TooShort { len: seq.len(), min });
    }
    Ok(seq.slice(N_TERMINAL_TRIM, seq.len() - C_TERMINAL_TRIM))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_of_len(n: usize) -> AminoAcidSequence {
        let bytes: Vec<u8> = (0..n).map(|i| ALPHABET[i % 20]).collect();
        AminoAcidSequence::from_bytes(&bytes, "t").unwrap()
    }

    #[test]
    fn alphabet_indices_are_dense() {
        for (i, &b) in ALPHABET.iter().enumerate() {
            assert_eq!(residue_index(b), Some(i));
        }
        assert_eq!(residue_index(b'X'), None);
        assert_eq!(residue_index(b'a'), None);
    }

    #[test]
    fn rejects_unknown_symbol_with_position() {
        match AminoAcidSequence::from_bytes(b"GGZ", "x") {
            Err(Error::Validation { record, position, symbol }) => {
                assert_eq!(record, "x");
                assert_eq!(position, 3);
                assert_eq!(symbol, 'Z');
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeat_region_lengths() {
        let s = seq_of_len(300);
        let r = extract_repeat_region(&s).unwrap();
        assert_eq!(r.len(), 35);
        assert_eq!(r.as_bytes(), &s.as_bytes()[150..185]);

        assert!(matches!(
            extract_repeat_region(&seq_of_len(265)),
            Err(Error::TooShort { len: 265, .. })
        ));

        let s = seq_of_len(266);
        let r = extract_repeat_region(&s).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.as_bytes()[0], s.as_bytes()[150]);
    }

    #[test]
    fn composition_sums_to_one() {
        let s = AminoAcidSequence::new("GGAQYGS").unwrap();
        let total: f64 = s.composition().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_validates() {
        let s: AminoAcidSequence = serde_json::from_str("\"GGA\"").unwrap();
        assert_eq!(s.as_str(), "GGA");
        assert!(serde_json::from_str::<AminoAcidSequence>("\"GGB\"").is_err());
    }
}
