//! ProtParam-style physicochemical descriptors.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{residue_index, AminoAcidSequence, ALPHABET};

pub const WATER_MASS: f64 = 18.0153;

/// Average masses of the free amino acids (Da), in [`ALPHABET`] order.
pub const AMINO_ACID_MASS: [f64; 20] = [
    89.0932,  // A
    174.201,  // R
    132.1179, // N
    133.1027, // D
    121.1582, // C
    146.1445, // Q
    147.1293, // E
    75.0666,  // G
    155.1546, // H
    131.1729, // I
    131.1729, // L
    146.1876, // K
    149.2113, // M
    165.1891, // F
    115.1305, // P
    105.0926, // S
    119.1192, // T
    204.2252, // W
    181.1885, // Y
    117.1463, // V
];

/// Residue masses plus one water.
pub fn molecular_weight(seq: &AminoAcidSequence) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("molecular weight of an empty sequence".into()));
    }
    let residues: f64 = seq.as_bytes().iter().map(|&r| AMINO_ACID_MASS[residue_index(r).expect("validated")] - WATER_MASS).sum();
    Ok(residues + WATER_MASS)
}

/// Ionizable-group pK values loaded from the bundled table.
#[derive(Debug, Clone, PartialEq)]
pub struct PkaTable {
    pub nterm_default: f64,
    pub cterm_default: f64,
    /// Terminal-residue overrides.
    pub nterm: Vec<(u8, f64)>,
    pub cterm: Vec<(u8, f64)>,
    /// Side chains carrying +1 when protonated.
    pub positive: Vec<(u8, f64)>,
    /// Side chains carrying −1 when deprotonated.
    pub negative: Vec<(u8, f64)>,
}

const PKA_DATA: &str = include_str!("../../data/pka_bjellqvist.tsv");

impl PkaTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = PkaTable {
            nterm_default: f64::NAN,
            cterm_default: f64::NAN,
            nterm: vec![],
            cterm: vec![],
            positive: vec![],
            negative: vec![],
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split('\t').collect();
            let [group, res, pka] = f[..] else {
                return Err(Error::Format(format!("bad pKa line '{line}'")));
            };
            let pka: f64 = pka.parse().map_err(|_| Error::Format(format!("bad pKa value '{pka}'")))?;
            let r = res.as_bytes()[0];
            match (group, res) {
                ("nterm", "*") => t.nterm_default = pka,
                ("cterm", "*") => t.cterm_default = pka,
                ("nterm", _) => t.nterm.push((r, pka)),
                ("cterm", _) => t.cterm.push((r, pka)),
                ("side", "K" | "R" | "H") => t.positive.push((r, pka)),
                ("side", _) => t.negative.push((r, pka)),
                _ => return Err(Error::Format(format!("unknown pKa group '{group}'"))),
            }
        }
        if t.nterm_default.is_nan() || t.cterm_default.is_nan() {
            return Err(Error::Format("pKa table lacks default terminal values".into()));
        }
        Ok(t)
    }

    pub fn bjellqvist() -> &'static Self {
        static T: OnceLock<PkaTable> = OnceLock::new();
        T.get_or_init(|| Self::parse(PKA_DATA).expect("bundled pKa table"))
    }

    fn lookup(list: &[(u8, f64)], r: u8, default: f64) -> f64 {
        list.iter().find(|(x, _)| *x == r).map_or(default, |p| p.1)
    }

    pub fn nterm_pk(&self, first: u8) -> f64 {
        Self::lookup(&self.nterm, first, self.nterm_default)
    }

    pub fn cterm_pk(&self, last: u8) -> f64 {
        Self::lookup(&self.cterm, last, self.cterm_default)
    }
}

/// Net charge at `ph` (Henderson–Hasselbalch, termini included).
pub fn net_charge(seq: &AminoAcidSequence, ph: f64, table: &PkaTable) -> f64 {
    let b = seq.as_bytes();
    let (Some(&first), Some(&last)) = (b.first(), b.last()) else {
        return 0.0;
    };
    let counts = seq.counts();
    let count = |r: u8| counts[residue_index(r).expect("table residue")] as f64;
    let pos = |pk: f64| 1.0 / (1.0 + 10f64.powf(ph - pk));
    let neg = |pk: f64| 1.0 / (1.0 + 10f64.powf(pk - ph));
    let mut q = pos(table.nterm_pk(first)) - neg(table.cterm_pk(last));
    q += table.positive.iter().map(|&(r, pk)| count(r) * pos(pk)).sum::<f64>();
    q -= table.negative.iter().map(|&(r, pk)| count(r) * neg(pk)).sum::<f64>();
    q
}

/// pH of zero net charge, by bisection on [0, 14].
pub fn isoelectric_point_with(seq: &AminoAcidSequence, table: &PkaTable, tol: f64) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("isoelectric point of an empty sequence".into()));
    }
    let (mut lo, mut hi) = (0.0f64, 14.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if net_charge(seq, mid, table) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn isoelectric_point(seq: &AminoAcidSequence) -> Result<f64> {
    isoelectric_point_with(seq, PkaTable::bjellqvist(), 1e-9)
}

/// Dipeptide instability weights, `DIWV[x][y]` for the pair `xy`, in
/// [`ALPHABET`] order.
#[rustfmt::skip]
pub const DIWV: [[f64; 20]; 20] = [
    [1.0, 1.0, 1.0, -7.49, 44.94, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, 1.0, 1.0, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 58.28, 13.34, 1.0, 1.0, 20.26, 1.0, -7.49, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 20.26, 44.94, 1.0, 58.28, -6.54, 1.0],
    [1.0, 1.0, 1.0, 1.0, -1.88, -6.54, 1.0, -14.03, 1.0, 44.94, 1.0, 24.68, 1.0, -14.03, -1.88, 1.0, -7.49, -9.37, 1.0, 1.0],
    [1.0, -6.54, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, -6.54, 1.0, 20.26, -14.03, 1.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 20.26, 1.0, -6.54, 1.0, 1.0, 33.6, 1.0, 20.26, 1.0, 33.6, 1.0, 20.26, 1.0, 33.6, 24.68, 1.0, -6.54],
    [1.0, 1.0, 1.0, 20.26, -6.54, 20.26, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -6.54, 20.26, 44.94, 1.0, 1.0, -6.54, -6.54],
    [1.0, 1.0, 1.0, 20.26, 44.94, 20.26, 33.6, 1.0, -6.54, 20.26, 1.0, 1.0, 1.0, 1.0, 20.26, 20.26, 1.0, -14.03, 1.0, 1.0],
    [-7.49, 1.0, -7.49, 1.0, 1.0, 1.0, -6.54, 13.34, 1.0, -7.49, 1.0, -7.49, 1.0, 1.0, 1.0, 1.0, -7.49, 13.34, -7.49, 1.0],
    [1.0, 1.0, 24.68, 1.0, 1.0, 1.0, 1.0, -9.37, 1.0, 44.94, 1.0, 24.68, 1.0, -9.37, -1.88, 1.0, -6.54, -1.88, 44.94, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 44.94, 1.0, 13.34, 1.0, 20.26, -7.49, 1.0, 1.0, -1.88, 1.0, 1.0, 1.0, 1.0, -7.49],
    [1.0, 20.26, 1.0, 1.0, 1.0, 33.6, 1.0, 1.0, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 20.26, 1.0, 1.0, 24.68, 1.0, 1.0],
    [1.0, 33.6, 1.0, 1.0, 1.0, 24.64, 1.0, -7.49, 1.0, -7.49, -7.49, 1.0, 33.6, 1.0, -6.54, 1.0, 1.0, 1.0, 1.0, -7.49],
    [13.34, -6.54, 1.0, 1.0, 1.0, -6.54, 1.0, 1.0, 58.28, 1.0, 1.0, 1.0, -1.88, 1.0, 44.94, 44.94, -1.88, 1.0, 24.68, 1.0],
    [1.0, 1.0, 1.0, 13.34, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -14.03, 1.0, 1.0, 20.26, 1.0, 1.0, 1.0, 33.601, 1.0],
    [20.26, -6.54, 1.0, -6.54, -6.54, 20.26, 18.38, 1.0, 1.0, 1.0, 1.0, 1.0, -6.54, 20.26, 20.26, 20.26, 1.0, -1.88, 1.0, 20.26],
    [1.0, 20.26, 1.0, 1.0, 33.6, 20.26, 20.26, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 44.94, 20.26, 1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, -14.03, 1.0, 1.0, -6.54, 20.26, -7.49, 1.0, 1.0, 1.0, 1.0, 1.0, 13.34, 1.0, 1.0, 1.0, -14.03, 1.0, 1.0],
    [-14.03, 1.0, 13.34, 1.0, 1.0, 1.0, 1.0, -9.37, 24.68, 1.0, 13.34, 1.0, 24.68, 1.0, 1.0, 1.0, -14.03, 1.0, 1.0, -7.49],
    [24.68, -15.91, 1.0, 24.68, 1.0, 1.0, -6.54, -7.49, 13.34, 1.0, 1.0, 1.0, 44.94, 1.0, 13.34, 1.0, -7.49, -9.37, 13.34, 1.0],
    [1.0, 1.0, 1.0, -14.03, 1.0, 1.0, 1.0, -7.49, 1.0, 1.0, 1.0, -1.88, 1.0, 1.0, 20.26, 1.0, -7.49, 1.0, -6.54, 1.0],
];

pub fn diwv(x: u8, y: u8) -> f64 {
    DIWV[residue_index(x).expect("validated")][residue_index(y).expect("validated")]
}

/// `(10 / len) · Σ DIWV(xᵢ, xᵢ₊₁)`.
pub fn instability_index(seq: &AminoAcidSequence) -> Result<f64> {
    let b = seq.as_bytes();
    if b.len() < 2 {
        return Err(Error::TooShort { len: b.len(), min: 1 });
    }
    let sum: f64 = b.windows(2).map(|w| diwv(w[0], w[1])).sum();
    Ok(10.0 * sum / b.len() as f64)
}

pub const HELIX_RESIDUES: &[u8] = b"VIYFWL";
pub const SHEET_RESIDUES: &[u8] = b"EMAL";

/// Helix, sheet and other fractions by residue class. `L` belongs to both
/// helix and sheet; "other" counts residues in neither.
pub fn ss_fractions(seq: &AminoAcidSequence) -> Result<(f64, f64, f64)> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("secondary-structure fractions of an empty sequence".into()));
    }
    let n = seq.len() as f64;
    let b = seq.as_bytes();
    let frac = |set: &[u8]| b.iter().filter(|r| set.contains(r)).count() as f64 / n;
    let other = b.iter().filter(|r| !HELIX_RESIDUES.contains(r) && !SHEET_RESIDUES.contains(r)).count() as f64 / n;
    Ok((frac(HELIX_RESIDUES), frac(SHEET_RESIDUES), other))
}

/// Nonpolar, polar, acidic and basic fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupedComposition {
    pub nonpolar: f64,
    pub polar: f64,
    pub acidic: f64,
    pub basic: f64,
}

pub fn grouped_composition(seq: &AminoAcidSequence) -> Result<GroupedComposition> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("composition of an empty sequence".into()));
    }
    let n = seq.len() as f64;
    let frac = |set: &[u8]| seq.as_bytes().iter().filter(|r| set.contains(r)).count() as f64 / n;
    Ok(GroupedComposition {
        nonpolar: frac(b"AVLIMFWPG"),
        polar: frac(b"STCYNQ"),
        acidic: frac(b"DE"),
        basic: frac(b"KRH"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysChemReport {
    pub length: usize,
    pub molecular_weight: f64,
    pub isoelectric_point: f64,
    /// Undefined for single residues.
    pub instability_index: Option<f64>,
    /// Residue fractions keyed by one-letter code, in alphabet order.
    pub composition: Vec<(char, f64)>,
    pub grouped: GroupedComposition,
    pub helix: f64,
    pub sheet: f64,
    pub other: f64,
}

pub fn physchem(seq: &AminoAcidSequence) -> Result<PhysChemReport> {
    let (helix, sheet, other) = ss_fractions(seq)?;
    let comp = seq.composition();
    Ok(PhysChemReport {
        length: seq.len(),
        molecular_weight: molecular_weight(seq)?,
        isoelectric_point: isoelectric_point(seq)?,
        instability_index: instability_index(seq).ok(),
        composition: ALPHABET.iter().zip(comp).map(|(&r, f)| (r as char, f)).collect(),
        grouped: grouped_composition(seq)?,
        helix,
        sheet,
        other,
    })
}
