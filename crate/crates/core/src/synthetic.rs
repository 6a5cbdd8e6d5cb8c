//! Synthetic repeat corpora with known structure, for desk-scale runs.
//!
//! [`RepeatGrammar`] emits MaSp-like repeats: poly-Ala blocks separated by
//! GGX- or GPGXX-rich linkers. [`property_dataset`] builds a labeled set in
//! which toughness is a clipped affine function of YGQGG coverage and strain
//! at break an affine function of GPGXX coverage; the remaining properties
//! are noise.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{AminoAcidSequence, LabeledRecord, PropertyVector, ALPHABET};

const GGX_RESIDUES: &[u8] = b"AQYLS";
const GPGXX_UNITS: [&[u8]; 4] = [b"GPGQQ", b"GPGGY", b"GPGSQ", b"GPGGA"];

/// Grammar for poly-Ala / linker repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatGrammar {
    /// Inclusive range of poly-Ala run lengths.
    pub poly_a: (usize, usize),
    /// Inclusive range of blocks (poly-Ala + linker) per sequence.
    pub blocks: (usize, usize),
    /// Probability that a linker is GPGXX-rich rather than GGX-rich.
    pub p_gpgxx: f64,
    /// Probability that a GGX linker ends in a YGQGG unit.
    pub p_ygqgg: f64,
}

impl Default for RepeatGrammar {
    fn default() -> Self {
        Self { poly_a: (4, 7), blocks: (4, 6), p_gpgxx: 0.4, p_ygqgg: 0.25 }
    }
}

impl RepeatGrammar {
    pub fn validate(&self) -> Result<()> {
        let ok = self.poly_a.0 >= 3
            && self.poly_a.0 <= self.poly_a.1
            && self.blocks.0 >= 1
            && self.blocks.0 <= self.blocks.1
            && (0.0..=1.0).contains(&self.p_gpgxx)
            && (0.0..=1.0).contains(&self.p_ygqgg);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid repeat grammar {self:?}")))
        }
    }

    fn linker<R: Rng>(&self, rng: &mut R, out: &mut Vec<u8>) {
        if rng.random_bool(self.p_gpgxx) {
            for _ in 0..rng.random_range(1..=2) {
                out.extend_from_slice(GPGXX_UNITS.choose(rng).expect("non-empty"));
            }
        } else {
            for _ in 0..rng.random_range(2..=3) {
                out.extend_from_slice(b"GG");
                out.push(*GGX_RESIDUES.choose(rng).expect("non-empty"));
            }
            if rng.random_bool(self.p_ygqgg) {
                out.extend_from_slice(b"YGQGG");
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> AminoAcidSequence {
        let mut s = Vec::new();
        for _ in 0..rng.random_range(self.blocks.0..=self.blocks.1) {
            s.resize(s.len() + rng.random_range(self.poly_a.0..=self.poly_a.1), b'A');
            self.linker(rng, &mut s);
        }
        AminoAcidSequence::from_bytes(&s, "synthetic").expect("grammar emits canonical residues")
    }

    pub fn corpus(&self, n: usize, seed: u64) -> Result<Vec<AminoAcidSequence>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.sample(&mut rng)).collect())
    }
}

/// Mean residue composition of UniProtKB/Swiss-Prot, in `ALPHABET` order.
pub const SWISSPROT_COMPOSITION: [f64; 20] = [
    0.0825, 0.0553, 0.0406, 0.0545, 0.0137, 0.0393, 0.0675, 0.0707, 0.0227, 0.0596, 0.0966, 0.0584, 0.0242, 0.0386,
    0.0470, 0.0656, 0.0534, 0.0108, 0.0292, 0.0687,
];

/// Unstructured sequences with i.i.d. residues drawn from `probs`.
pub fn composition_corpus(n: usize, length: (usize, usize), probs: &[f64; 20], seed: u64) -> Result<Vec<AminoAcidSequence>> {
    if length.0 == 0 || length.0 > length.1 {
        return Err(Error::Config(format!("bad length range {length:?}")));
    }
    let dist = WeightedIndex::new(probs).map_err(|e| Error::Config(format!("composition: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let len = rng.random_range(length.0..=length.1);
            let s: Vec<u8> = (0..len).map(|_| ALPHABET[dist.sample(&mut rng)]).collect();
            AminoAcidSequence::from_bytes(&s, "synthetic").expect("alphabet residues")
        })
        .collect())
}

/// Layout of the labeled synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyDesign {
    /// Slots per sequence; each slot is a poly-Ala run plus one 5-residue unit.
    pub slots: usize,
    pub poly_a: usize,
    /// Maximum YGQGG (and, separately, GPGXX) units per sequence.
    pub max_units: usize,
}

impl Default for PropertyDesign {
    fn default() -> Self {
        Self { slots: 8, poly_a: 4, max_units: 4 }
    }
}

impl PropertyDesign {
    pub fn seq_len(&self) -> usize {
        self.slots * (self.poly_a + 5)
    }

    /// Raw toughness for a YGQGG coverage.
    pub fn toughness(cov: f64) -> f64 {
        (60.0 + 500.0 * cov).clamp(70.0, 190.0)
    }

    /// Raw strain at break for a GPGXX coverage.
    pub fn strain(cov: f64) -> f64 {
        0.1 + 1.5 * cov
    }
}

/// `n` labeled records following `design`.
pub fn property_dataset(n: usize, design: &PropertyDesign, seed: u64) -> Result<Vec<LabeledRecord>> {
    if design.slots < 2 * design.max_units || design.poly_a < 3 {
        return Err(Error::Config(format!("invalid property design {design:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = design.seq_len() as f64;
    (0..n)
        .map(|i| {
            let ky = rng.random_range(0..=design.max_units);
            let kg = rng.random_range(0..=design.max_units);
            let mut units: Vec<&[u8]> = Vec::with_capacity(design.slots);
            units.extend(std::iter::repeat_n(&b"YGQGG"[..], ky));
            for _ in 0..kg {
                units.push(GPGXX_UNITS.choose(&mut rng).expect("non-empty"));
            }
            units.resize(design.slots, b"GGAGG");
            units.shuffle(&mut rng);
            let mut s = Vec::with_capacity(design.seq_len());
            for u in units {
                s.resize(s.len() + design.poly_a, b'A');
                s.extend_from_slice(u);
            }
            let sequence = AminoAcidSequence::from_bytes(&s, "synthetic")?;
            let toughness = PropertyDesign::toughness(5.0 * ky as f64 / len);
            let strain = PropertyDesign::strain(5.0 * kg as f64 / len);
            let strength: f64 = rng.random_range(0.8..1.6);
            let modulus: f64 = rng.random_range(5.0..15.0);
            let sd = |rng: &mut ChaCha8Rng, x: f64| x * rng.random_range(0.05..0.2);
            let v = [
                toughness,
                sd(&mut rng, toughness),
                strength,
                sd(&mut rng, strength),
                modulus,
                sd(&mut rng, modulus),
                strain,
                sd(&mut rng, strain),
            ];
            Ok(LabeledRecord {
                id: format!("syn{i:04}"),
                sequence,
                properties: PropertyVector::raw(v),
                species: "synthetic".into(),
                subtype: "MaSp".into(),
            })
        })
        .collect()
}
