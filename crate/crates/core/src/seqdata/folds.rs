use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-size partition of record indices plus the folds chosen as
/// validation sets for independent runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub selected: Vec<usize>,
}

impl FoldPlan {
    pub fn n_records(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// `(train indices, validation indices)` for the `run`-th selected fold.
    pub fn split(&self, run: usize) -> (Vec<usize>, Vec<usize>) {
        let held = self.selected[run];
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != held)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (train, self.folds[held].clone())
    }
}

/// Shuffle `0..n` under `seed`, cut it into `k` equal folds and pick
/// `selected` of them (returned in ascending order).
pub fn make_folds(n: usize, k: usize, selected: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || n == 0 || n % k != 0 {
        return Err(Error::Config(format!("{k} folds do not divide {n} records evenly")));
    }
    if selected == 0 || selected > k {
        return Err(Error::Config(format!("cannot select {selected} of {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let size = n / k;
    let folds: Vec<Vec<usize>> = idx.chunks(size).map(<[usize]>::to_vec).collect();
    let mut fold_ids: Vec<usize> = (0..k).collect();
    fold_ids.shuffle(&mut rng);
    let mut chosen = fold_ids[..selected].to_vec();
    chosen.sort_unstable();
    Ok(FoldPlan { folds, selected: chosen })
}
