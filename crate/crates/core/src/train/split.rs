use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;

/// Fewest windows a split accepts.
pub const MIN_WINDOWS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train, validation and test percentages.
    pub ratios: [u32; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [90, 5, 5],
            seed: 0,
        }
    }
}

/// Window indices of each partition, each list ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random partition of `0..n_windows`. Validation and test sizes are floored;
/// the remainder goes to training.
pub fn split(n_windows: usize, config: &SplitConfig) -> Result<Split, TrainError> {
    if config.ratios.iter().sum::<u32>() != 100 {
        return Err(TrainError::Config(format!("split ratios {:?} do not sum to 100", config.ratios)));
    }
    if n_windows < MIN_WINDOWS {
        return Err(TrainError::TooFewWindows {
            got: n_windows,
            required: MIN_WINDOWS,
        });
    }
    let n_val = n_windows * config.ratios[1] as usize / 100;
    let n_test = n_windows * config.ratios[2] as usize / 100;
    let mut order: Vec<usize> = (0..n_windows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut val = order[..n_val].to_vec();
    let mut test = order[n_val..n_val + n_test].to_vec();
    let mut train = order[n_val + n_test..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}
