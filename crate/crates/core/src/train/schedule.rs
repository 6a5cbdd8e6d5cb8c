use serde::{Deserialize, Serialize};

/// Linear warmup from 0 to `lr` over `warmup` steps, then constant.
pub fn lr_at(step: usize, lr: f64, warmup: usize) -> f64 {
    if step < warmup {
        lr * step as f64 / warmup as f64
    } else {
        lr
    }
}

/// Patience-based stopping on validation loss. Only strict improvements
/// reset the counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopState {
    pub best: Option<f64>,
    pub best_epoch: Option<usize>,
    pub since_improvement: usize,
    pub patience: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self { best: None, best_epoch: None, since_improvement: 0, patience }
    }

    /// Record the loss after `epoch`; returns `true` when training should stop.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> bool {
        if self.best.is_none_or(|b| val_loss < b) {
            self.best = Some(val_loss);
            self.best_epoch = Some(epoch);
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.since_improvement >= self.patience
    }

    pub fn improved_last(&self) -> bool {
        self.since_improvement == 0
    }
}

/// Keeps the `keep` entries with the lowest validation loss, ordered best
/// first. Ties keep the earlier entry.
#[derive(Debug, Clone)]
pub struct Retention<T> {
    keep: usize,
    entries: Vec<(f64, usize, T)>,
}

impl<T> Retention<T> {
    pub fn new(keep: usize) -> Self {
        Self { keep: keep.max(1), entries: Vec::new() }
    }

    /// Offer an entry; returns the evicted one, if any (possibly the offer).
    pub fn offer(&mut self, val_loss: f64, epoch: usize, item: T) -> Option<(f64, usize, T)> {
        let pos = self.entries.iter().position(|(l, _, _)| val_loss < *l).unwrap_or(self.entries.len());
        self.entries.insert(pos, (val_loss, epoch, item));
        (self.entries.len() > self.keep).then(|| self.entries.pop().expect("non-empty"))
    }

    pub fn best(&self) -> Option<&(f64, usize, T)> {
        self.entries.first()
    }

    pub fn entries(&self) -> &[(f64, usize, T)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(f64, usize, T)> {
        self.entries
    }

    pub fn into_best(self) -> Option<(f64, usize, T)> {
        self.entries.into_iter().next()
    }
}
