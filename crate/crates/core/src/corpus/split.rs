use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed: 13,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let r = [self.train, self.validation, self.test];
        if r.iter().any(|&x| !(x > 0.0)) {
            return Err(CorpusError::BadSplit(format!(
                "ratios must be positive, got {r:?}"
            )));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadSplit(format!(
                "ratios must sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle, then contiguous slices of `round(ratio × n)` for train
/// and validation; the test split takes the remainder.
pub fn split_dataset<T: Clone>(pairs: &[T], spec: &SplitSpec) -> Result<Split<T>, CorpusError> {
    spec.validate()?;
    let n = pairs.len();
    if n < 10 {
        return Err(CorpusError::TooFewPairs(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = (spec.train * n as f64).round() as usize;
    let n_val = ((spec.validation * n as f64).round() as usize).min(n - n_train);
    let pick = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect::<Vec<T>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}
