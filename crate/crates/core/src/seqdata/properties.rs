//! Mechanical property vectors and the labeled-record TSV format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{AminoAcidSequence, FastaRecord};

/// Column names in conditioning-vector order.
pub const PROPERTY_NAMES: [&str; 8] = [
    "toughness",
    "sd_toughness",
    "strength",
    "sd_strength",
    "youngs_modulus",
    "sd_youngs_modulus",
    "strain_at_break",
    "sd_strain_at_break",
];

/// Positions of the four mean properties inside the 8-vector.
pub const TOUGHNESS: usize = 0;
pub const STRENGTH: usize = 2;
pub const YOUNGS_MODULUS: usize = 4;
pub const STRAIN_AT_BREAK: usize = 6;

/// The four mean properties (no standard deviations), in the order used by
/// correlation reports: toughness, E, strength, strain.
pub const MEAN_PROPERTIES: [usize; 4] = [TOUGHNESS, YOUNGS_MODULUS, STRENGTH, STRAIN_AT_BREAK];

/// Four mechanical properties with their standard deviations.
///
/// Field order matches the conditioning vector and is relied on by the
/// tokenizer. Units are whatever the source data used; nothing here converts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector {
    pub toughness: f64,
    pub sd_toughness: f64,
    pub strength: f64,
    pub sd_strength: f64,
    pub youngs_modulus: f64,
    pub sd_youngs_modulus: f64,
    pub strain_at_break: f64,
    pub sd_strain_at_break: f64,
    pub normalized: bool,
}

impl PropertyVector {
    pub fn from_array(v: [f64; 8], normalized: bool) -> Self {
        Self {
            toughness: v[0],
            sd_toughness: v[1],
            strength: v[2],
            sd_strength: v[3],
            youngs_modulus: v[4],
            sd_youngs_modulus: v[5],
            strain_at_break: v[6],
            sd_strain_at_break: v[7],
            normalized,
        }
    }

    pub fn raw(v: [f64; 8]) -> Self {
        Self::from_array(v, false)
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.toughness,
            self.sd_toughness,
            self.strength,
            self.sd_strength,
            self.youngs_modulus,
            self.sd_youngs_modulus,
            self.strain_at_break,
            self.sd_strain_at_break,
        ]
    }

    /// Parse `"t,st,s,ss,e,se,b,sb"`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 8 {
            return Err(Error::Format(format!(
                "expected 8 comma-separated property values, got {}",
                parts.len()
            )));
        }
        let mut v = [0.0; 8];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = parse_value(p)?;
        }
        Ok(Self::raw(v))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in PROPERTY_NAMES.iter().zip(self.to_array()) {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Format(format!("property {name} must be a finite non-negative number, got {x}")));
            }
            if self.normalized && x > 1.0 {
                return Err(Error::State(format!("normalized property {name} = {x} outside [0,1]")));
            }
        }
        Ok(())
    }
}

fn parse_value(s: &str) -> Result<f64> {
    let x: f64 = s
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse property value '{s}'")))?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Format(format!("property value '{s}' must be finite and non-negative")));
    }
    Ok(x)
}

/// One entry of the labeled dataset: a repeat sequence with its properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub sequence: AminoAcidSequence,
    pub properties: PropertyVector,
    #[serde(default)]
    pub species: String,
    #[serde(default)]
    pub subtype: String,
}

/// A row of a properties TSV; the sequence column is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRow {
    pub id: String,
    pub properties: PropertyVector,
    pub sequence: Option<AminoAcidSequence>,
    pub species: String,
    pub subtype: String,
}

pub fn tsv_header(with_sequence: bool) -> String {
    let mut h = String::from("id");
    for name in PROPERTY_NAMES {
        h.push('\t');
        h.push_str(name);
    }
    if with_sequence {
        h.push_str("\tsequence");
    }
    h
}

/// Parse a properties TSV. The first nine columns are fixed; optional extra
/// columns `sequence`, `species` and `subtype` are recognised by name.
pub fn parse_properties_tsv(text: &str) -> Result<Vec<PropertyRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty properties TSV".into()))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let expected = tsv_header(false);
    let expected: Vec<&str> = expected.split('\t').collect();
    if cols.len() < 9 || cols[..9] != expected[..] {
        return Err(Error::Format(format!("properties TSV header must start with: {}", expected.join(" "))));
    }
    let mut extra = HashMap::new();
    for (i, name) in cols.iter().enumerate().skip(9) {
        match *name {
            "sequence" | "species" | "subtype" => {
                extra.insert(*name, i);
            }
            other => return Err(Error::Format(format!("unknown properties TSV column '{other}'"))),
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if fields.len() != cols.len() {
            return Err(Error::Format(format!(
                "properties TSV line {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let id = fields[0].to_string();
        let mut v = [0.0; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_value(fields[k + 1])?;
        }
        let sequence = match extra.get("sequence") {
            Some(&i) => Some(AminoAcidSequence::from_bytes(fields[i].as_bytes(), &id)?),
            None => None,
        };
        let get = |name: &str| extra.get(name).map(|&i| fields[i].to_string()).unwrap_or_default();
        rows.push(PropertyRow {
            id,
            properties: PropertyVector::raw(v),
            sequence,
            species: get("species"),
            subtype: get("subtype"),
        });
    }
    Ok(rows)
}

/// Serialize `(id, vector)` rows. Values use Rust's shortest round-trip
/// formatting so the output is stable across runs.
pub fn write_properties_tsv<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a PropertyVector)>,
{
    let mut out = tsv_header(false);
    out.push('\n');
    for (id, v) in rows {
        out.push_str(id);
        for x in v.to_array() {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    }
    out
}

/// Serialize labeled records including their sequences.
pub fn write_labeled_tsv(records: &[LabeledRecord]) -> String {
    let mut out = tsv_header(true);
    out.push('\n');
    for r in records {
        out.push_str(&r.id);
        for x in r.properties.to_array() {
            let _ = write!(out, "\t{x}");
        }
        let _ = writeln!(out, "\t{}", r.sequence);
    }
    out
}

/// Build labeled records from TSV rows, taking sequences either from the TSV
/// itself or from FASTA records matched by id.
pub fn join_labeled(rows: Vec<PropertyRow>, fasta: Option<&[FastaRecord]>) -> Result<Vec<LabeledRecord>> {
    let by_id: HashMap<&str, &FastaRecord> =
        fasta.unwrap_or(&[]).iter().map(|r| (r.id(), r)).collect();
    rows.into_iter()
        .map(|row| {
            let sequence = match row.sequence {
                Some(s) => s,
                None => by_id
                    .get(row.id.as_str())
                    .map(|r| r.sequence.clone())
                    .ok_or_else(|| Error::Format(format!("no sequence for record '{}'", row.id)))?,
            };
            Ok(LabeledRecord {
                id: row.id,
                sequence,
                properties: row.properties,
                species: row.species,
                subtype: row.subtype,
            })
        })
        .collect()
}

pub fn read_labeled(tsv: &Path, fasta: Option<&Path>) -> Result<Vec<LabeledRecord>> {
    let rows = parse_properties_tsv(&std::fs::read_to_string(tsv)?)?;
    let fasta_records = match fasta {
        Some(p) => Some(crate::seqdata::read_fasta_file(p)?),
        None => None,
    };
    join_labeled(rows, fasta_records.as_deref())
}
