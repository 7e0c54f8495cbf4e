use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::TrainError;

/// Ordered pairs with their labels, possibly spanning several windows
/// (`window` holds the window index of each entry).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairBatch {
    pub window: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<bool>,
}

impl PairBatch {
    pub fn push(&mut self, window: usize, pair: (usize, usize), label: bool) {
        debug_assert!(pair.0 != pair.1);
        self.window.push(window);
        self.pairs.push(pair);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    fn select(&self, keep: &[usize]) -> Self {
        let mut out = Self::default();
        for &k in keep {
            out.push(self.window[k], self.pairs[k], self.labels[k]);
        }
        out
    }

    /// Keeps every entry of the smaller class and an equally sized random subset
    /// of the larger one, in shuffled order.
    pub fn balance<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self, TrainError> {
        let pos: Vec<usize> = (0..self.len()).filter(|&k| self.labels[k]).collect();
        let neg: Vec<usize> = (0..self.len()).filter(|&k| !self.labels[k]).collect();
        if pos.is_empty() {
            return Err(TrainError::EmptyClass("positive"));
        }
        if neg.is_empty() {
            return Err(TrainError::EmptyClass("negative"));
        }
        let m = pos.len().min(neg.len());
        let mut pick = |from: &[usize]| -> Vec<usize> {
            if from.len() == m {
                from.to_vec()
            } else {
                index::sample(rng, from.len(), m).into_iter().map(|k| from[k]).collect()
            }
        };
        let mut keep = pick(&pos);
        keep.extend(pick(&neg));
        keep.shuffle(rng);
        Ok(self.select(&keep))
    }
}
