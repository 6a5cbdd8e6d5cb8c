use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalsuite::motifs::{count_motifs, feature_names};
use crate::evalsuite::stats::pearson;
use crate::seqdata::{LabeledRecord, MEAN_PROPERTIES, PROPERTY_NAMES};

/// Motif features (rows) against the four mean properties (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub properties: Vec<String>,
    /// `None` where a column has zero variance.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("feature\t{}\n", self.properties.join("\t"));
        for (name, row) in self.features.iter().zip(&self.cells) {
            out.push_str(name);
            for c in row {
                match c {
                    Some(v) => write!(out, "\t{v:.6}").expect("string write"),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation of arbitrary feature columns with property columns.
pub fn correlation_matrix(
    features: &[Vec<f64>],
    feature_names: Vec<String>,
    properties: &[Vec<f64>],
    property_names: Vec<String>,
) -> Result<CorrelationMatrix> {
    let n = features.len();
    if n < 3 {
        return Err(Error::EmptyInput(format!("correlation needs at least 3 records, got {n}")));
    }
    if properties.len() != n {
        return Err(Error::Length("feature and property row counts differ".into()));
    }
    let col = |m: &[Vec<f64>], j: usize| m.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let cells = (0..feature_names.len())
        .map(|i| {
            let f = col(features, i);
            (0..property_names.len()).map(|j| pearson(&f, &col(properties, j))).collect()
        })
        .collect();
    Ok(CorrelationMatrix { features: feature_names, properties: property_names, cells })
}

/// The 14 × 4 motif-feature / mechanical-property matrix.
pub fn feature_property_correlation(records: &[LabeledRecord]) -> Result<CorrelationMatrix> {
    let features: Vec<Vec<f64>> = records.iter().map(|r| count_motifs(&r.sequence).features().to_vec()).collect();
    let props: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let a = r.properties.to_array();
            MEAN_PROPERTIES.iter().map(|&k| a[k]).collect()
        })
        .collect();
    let names = MEAN_PROPERTIES.iter().map(|&k| PROPERTY_NAMES[k].to_string()).collect();
    correlation_matrix(&features, feature_names(), &props, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::{AminoAcidSequence, PropertyVector};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(seq: &str, t: f64, e: f64) -> LabeledRecord {
        LabeledRecord {
            id: seq.into(),
            sequence: AminoAcidSequence::new(seq).unwrap(),
            properties: PropertyVector::raw([t, 0.1, 1.0, 0.1, e, 0.1, 0.2, 0.1]),
            species: String::new(),
            subtype: String::new(),
        }
    }

    #[test]
    fn shape_and_identity() {
        let recs = vec![rec("YGQGGAAA", 1.0, 2.0), rec("YGQGGYGQGGAAAA", 2.0, 1.0), rec("AAAA", 0.0, 5.0)];
        let m = feature_property_correlation(&recs).unwrap();
        assert_eq!((m.cells.len(), m.cells[0].len()), (14, 4));
        assert_eq!(m.properties, vec!["toughness", "youngs_modulus", "strength", "strain_at_break"]);
        // YGQGG count is 1, 2, 0 and toughness is 1, 2, 0.
        assert!((m.cells[0][0].unwrap() - 1.0).abs() < 1e-12);
        // Strength is constant.
        assert_eq!(m.cells[0][2], None);
        assert!(m.to_tsv().lines().nth(1).unwrap().contains("\tNA"));
        assert!(feature_property_correlation(&recs[..2]).is_err());
    }

    #[test]
    fn shuffled_property_is_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let mut p = f.clone();
        p.shuffle(&mut rng);
        let m = correlation_matrix(
            &f.iter().map(|x| vec![*x]).collect::<Vec<_>>(),
            vec!["f".into()],
            &p.iter().map(|x| vec![*x]).collect::<Vec<_>>(),
            vec!["p".into()],
        )
        .unwrap();
        assert!(m.cells[0][0].unwrap().abs() < 0.1);
    }
}
