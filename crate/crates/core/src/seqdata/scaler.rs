use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{LabeledRecord, PropertyVector};

/// Per-component min–max scaling to `[0, 1]`.
///
/// A component whose fitted min equals its max is marked degenerate and maps
/// to `0.0`; inverting such a component returns the fitted constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: [f64; 8],
    pub max: [f64; 8],
    pub degenerate: [bool; 8],
}

impl MinMaxScaler {
    pub fn fit(vectors: &[PropertyVector]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::EmptyInput(format!(
                "scaler needs at least 2 records, got {}",
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| v.normalized) {
            return Err(Error::State("cannot fit a scaler on already-normalized vectors".into()));
        }
        let mut min = [f64::INFINITY; 8];
        let mut max = [f64::NEG_INFINITY; 8];
        for v in vectors {
            for (k, x) in v.to_array().into_iter().enumerate() {
                min[k] = min[k].min(x);
                max[k] = max[k].max(x);
            }
        }
        let degenerate = std::array::from_fn(|k| max[k] == min[k]);
        Ok(Self { min, max, degenerate })
    }

    pub fn fit_records(records: &[LabeledRecord]) -> Result<Self> {
        let v: Vec<PropertyVector> = records.iter().map(|r| r.properties).collect();
        Self::fit(&v)
    }

    pub fn has_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    /// Values outside the fitted range are clamped so the result always
    /// satisfies the normalized-vector invariant.
    pub fn apply(&self, v: &PropertyVector) -> Result<PropertyVector> {
        if v.normalized {
            return Err(Error::State("vector is already normalized".into()));
        }
        let raw = v.to_array();
        let out = std::array::from_fn(|k| {
            if self.degenerate[k] {
                0.0
            } else {
                ((raw[k] - self.min[k]) / (self.max[k] - self.min[k])).clamp(0.0, 1.0)
            }
        });
        Ok(PropertyVector::from_array(out, true))
    }

    pub fn invert(&self, v: &PropertyVector) -> Result<PropertyVector> {
        if !v.normalized {
            return Err(Error::State("invert_scaler requires a normalized vector".into()));
        }
        let x = v.to_array();
        let out = std::array::from_fn(|k| {
            if self.degenerate[k] {
                self.min[k]
            } else {
                self.min[k] + x[k] * (self.max[k] - self.min[k])
            }
        });
        Ok(PropertyVector::from_array(out, false))
    }
}
