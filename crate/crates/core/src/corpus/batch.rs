use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::EncodedPair;
use super::vocab::PAD;
use super::CorpusError;

/// Padded mini-batch. Rows are padded with `<pad>` to the longest sequence
/// in the batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub source: Vec<Vec<usize>>,
    pub target: Vec<Vec<usize>>,
    pub source_lengths: Vec<usize>,
    pub target_lengths: Vec<usize>,
}

impl Batch {
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = &'a EncodedPair>,
    {
        let pairs: Vec<&EncodedPair> = pairs.into_iter().collect();
        let src_w = pairs.iter().map(|p| p.source_ids.len()).max().unwrap_or(0);
        let tgt_w = pairs.iter().map(|p| p.target_ids.len()).max().unwrap_or(0);
        let pad = |ids: &[usize], w: usize| {
            let mut row = ids.to_vec();
            row.resize(w, PAD);
            row
        };
        Batch {
            source: pairs.iter().map(|p| pad(&p.source_ids, src_w)).collect(),
            target: pairs.iter().map(|p| pad(&p.target_ids, tgt_w)).collect(),
            source_lengths: pairs.iter().map(|p| p.source_ids.len()).collect(),
            target_lengths: pairs.iter().map(|p| p.target_ids.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Unpadded source of row `i`.
    pub fn source_row(&self, i: usize) -> &[usize] {
        &self.source[i][..self.source_lengths[i]]
    }

    /// Unpadded target of row `i`, including `<s>` and `</s>`.
    pub fn target_row(&self, i: usize) -> &[usize] {
        &self.target[i][..self.target_lengths[i]]
    }

    /// Number of predicted target positions (everything after `<s>`).
    pub fn target_tokens(&self) -> usize {
        self.target_lengths
            .iter()
            .map(|&l| l.saturating_sub(1))
            .sum()
    }
}

/// Single-pass iterator over the batches of one epoch.
pub struct BatchIter<'a> {
    pairs: &'a [EncodedPair],
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = Batch::from_pairs(self.order[self.pos..end].iter().map(|&i| &self.pairs[i]));
        self.pos = end;
        Some(batch)
    }
}

/// Batches of `batch_size` covering every pair once. With a seed the order is
/// a seeded shuffle; without one it is the input order.
pub fn batches(
    pairs: &[EncodedPair],
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<BatchIter<'_>, CorpusError> {
    if batch_size == 0 {
        return Err(CorpusError::BadBatchSize);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(BatchIter {
        pairs,
        order,
        batch_size,
        pos: 0,
    })
}
