//! Unigram-alignment METEOR without the synonym stage.
//!
//! The alignment maximizes exact matches, then total matches (exact plus
//! Porter-stem), then minimizes the number of chunks. It is found by a
//! memoized search over candidate positions; the number of distinct states
//! only grows with repeated words, and a state budget guards pathological
//! inputs by falling back to a left-to-right chunk-extending alignment.

use std::collections::HashMap;

use porter_stemmer::stem;

const EXACT_WEIGHT: i64 = 1_000_000;
const MATCH_WEIGHT: i64 = 1_000;
const STATE_BUDGET: usize = 2_000_000;

/// Match counts of an alignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub exact: usize,
    pub matches: usize,
    pub chunks: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    None,
    Stem,
    Exact,
}

struct Search<'a> {
    kinds: &'a [Vec<Kind>],
    memo: HashMap<(usize, u128, usize), i64>,
    exhausted: bool,
}

impl Search<'_> {
    /// Best objective from candidate position `i` on. `prev` is the ref
    /// index matched by `i - 1`, or `usize::MAX`.
    fn best(&mut self, i: usize, used: u128, prev: usize) -> i64 {
        if i == self.kinds.len() {
            return 0;
        }
        if let Some(&v) = self.memo.get(&(i, used, prev)) {
            return v;
        }
        if self.memo.len() > STATE_BUDGET {
            self.exhausted = true;
            return 0;
        }
        let mut best = self.best(i + 1, used, usize::MAX);
        for (j, &k) in self.kinds[i].iter().enumerate() {
            if k == Kind::None || used & (1u128 << j) != 0 {
                continue;
            }
            let mut gain = MATCH_WEIGHT + if k == Kind::Exact { EXACT_WEIGHT } else { 0 };
            if prev != usize::MAX && j == prev + 1 {
                gain += 1;
            }
            best = best.max(gain + self.best(i + 1, used | (1u128 << j), j));
        }
        self.memo.insert((i, used, prev), best);
        best
    }
}

fn decode(value: i64) -> (usize, usize, usize) {
    let exact = (value / EXACT_WEIGHT) as usize;
    let rest = value % EXACT_WEIGHT;
    let matches = (rest / MATCH_WEIGHT) as usize;
    let continuations = (rest % MATCH_WEIGHT) as usize;
    (exact, matches, continuations)
}

fn kinds<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Vec<Vec<Kind>> {
    let cs: Vec<String> = candidate.iter().map(|t| stem(t.as_ref())).collect();
    let rs: Vec<String> = reference.iter().map(|t| stem(t.as_ref())).collect();
    candidate
        .iter()
        .enumerate()
        .map(|(i, c)| {
            reference
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    if c.as_ref() == r.as_ref() {
                        Kind::Exact
                    } else if cs[i] == rs[j] {
                        Kind::Stem
                    } else {
                        Kind::None
                    }
                })
                .collect()
        })
        .collect()
}

/// Left-to-right fallback: prefer the match that extends the current chunk,
/// then exact over stem, then the leftmost reference position.
fn greedy_alignment(kinds: &[Vec<Kind>]) -> Alignment {
    let mut used = vec![false; kinds.first().map_or(0, Vec::len)];
    let (mut exact, mut matches, mut chunks) = (0, 0, 0);
    let mut prev: Option<usize> = None;
    for row in kinds {
        let pick = row
            .iter()
            .enumerate()
            .filter(|(j, k)| **k != Kind::None && !used[*j])
            .max_by_key(|(j, k)| {
                (
                    prev.map(|p| *j == p + 1).unwrap_or(false),
                    **k == Kind::Exact,
                    usize::MAX - *j,
                )
            });
        match pick {
            Some((j, k)) => {
                if !prev.is_some_and(|p| j == p + 1) {
                    chunks += 1;
                }
                used[j] = true;
                matches += 1;
                exact += usize::from(*k == Kind::Exact);
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    Alignment {
        exact,
        matches,
        chunks,
    }
}

pub fn align<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Alignment {
    let kinds = kinds(candidate, reference);
    if reference.len() > 128 {
        return greedy_alignment(&kinds);
    }
    let mut search = Search {
        kinds: &kinds,
        memo: HashMap::new(),
        exhausted: false,
    };
    let value = search.best(0, 0, usize::MAX);
    if search.exhausted {
        return greedy_alignment(&kinds);
    }
    let (exact, matches, continuations) = decode(value);
    Alignment {
        exact,
        matches,
        chunks: matches - continuations,
    }
}

/// Score from an alignment over sentences of the given lengths.
pub fn meteor_from_alignment(a: Alignment, cand_len: usize, ref_len: usize) -> f64 {
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (a.chunks as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}

pub fn meteor_lite<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    meteor_from_alignment(
        align(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}
