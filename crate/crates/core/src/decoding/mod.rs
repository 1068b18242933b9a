//! Beam search and greedy decoding with a minimum-length constraint.
//!
//! At every step the model's distribution is renormalized over the allowed
//! tokens: `<pad>` and `<s>` are never allowed, `</s>` is blocked until the
//! response has `min_tokens` content tokens, and once a response reaches
//! `max_len` only `</s>` remains (so the forced end costs nothing). Scores
//! are summed log-probabilities in `f64`, with no length normalization.

mod file;

use std::cmp::Ordering;

use thiserror::Error;

use crate::corpus::vocab::{BOS, EOS, PAD};
use crate::model::{EncoderOutput, Fcrg, ModelError};
use crate::tensor::{Real, Tensor};

pub use file::{
    format_generations, parse_generations, read_generations, write_generations, GenerationRecord,
};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error("{}line {line}: {msg}", file.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Parse {
        file: Option<String>,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DecodeError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Minimum number of content tokens (`τ`).
    pub min_tokens: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_size: 15,
            min_tokens: 0,
            max_len: 64,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(DecodeError::Config("beam_size must be at least 1".into()));
        }
        if self.min_tokens >= self.max_len {
            return Err(DecodeError::Config(format!(
                "min_tokens {} must be below max_len {}",
                self.min_tokens, self.max_len
            )));
        }
        Ok(())
    }
}

/// A completed response: content ids (no control tokens) and total
/// log-probability including the closing `</s>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
}

/// Partial hypothesis during search.
#[derive(Clone, Debug)]
pub struct Hypothesis<T: Real = f32> {
    /// Generated ids, excluding `<s>`; ends with `</s>` once finished.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub hidden: Tensor<T>,
    pub finished: bool,
}

impl<T: Real> Hypothesis<T> {
    fn content(&self) -> &[usize] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

/// Higher score first, then fewer content tokens, then lexicographic ids.
pub fn rank_order(a_score: f64, a: &[usize], b_score: f64, b: &[usize]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

/// Log-probabilities renormalized over the tokens allowed after
/// `content_len` content tokens; disallowed entries are `-inf`.
pub fn masked_log_probs<T: Real>(
    log_probs: &[T],
    content_len: usize,
    config: &DecodeConfig,
) -> Vec<f64> {
    let allowed = |k: usize| -> bool {
        if content_len >= config.max_len {
            return k == EOS;
        }
        match k {
            PAD | BOS => false,
            EOS => content_len >= config.min_tokens,
            _ => true,
        }
    };
    let mut out: Vec<f64> = log_probs
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if allowed(k) {
                x.as_f64()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return out;
    }
    let lse = m + out.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
    for x in &mut out {
        *x -= lse;
    }
    out
}

struct Candidate {
    parent: usize,
    token: usize,
    score: f64,
}

/// Top-`beam_size` responses, best first.
pub fn beam_search<T: Real>(
    model: &Fcrg<T>,
    source_ids: &[usize],
    config: &DecodeConfig,
) -> Result<Vec<Generated>> {
    config.validate()?;
    let encoded = model.encode(source_ids)?;
    let k = config.beam_size;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        hidden: encoded.last.clone(),
        finished: false,
    }];
    let mut pool: Vec<Hypothesis<T>> = Vec::new();

    while !live.is_empty() {
        if pool.len() >= k {
            let kth = pool[k - 1].log_prob;
            let best_live = live
                .iter()
                .map(|h| h.log_prob)
                .fold(f64::NEG_INFINITY, f64::max);
            if best_live <= kth {
                break;
            }
        }
        let mut steps = Vec::with_capacity(live.len());
        let mut cands = Vec::new();
        for (i, hyp) in live.iter().enumerate() {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let step = model.decode_step(prev, &hyp.hidden, &encoded)?;
            let lp = masked_log_probs(step.log_probs.data(), hyp.tokens.len(), config);
            for (tok, &l) in lp.iter().enumerate() {
                if l > f64::NEG_INFINITY {
                    cands.push(Candidate {
                        parent: i,
                        token: tok,
                        score: hyp.log_prob + l,
                    });
                }
            }
            steps.push(step.hidden);
        }
        let extended = |c: &Candidate| -> (Vec<usize>, bool) {
            let mut t = live[c.parent].tokens.clone();
            let finished = c.token == EOS;
            if !finished {
                t.push(c.token);
            }
            (t, finished)
        };
        let mut keyed: Vec<(Vec<usize>, bool, &Candidate)> = cands
            .iter()
            .map(|c| {
                let (t, f) = extended(c);
                (t, f, c)
            })
            .collect();
        keyed.sort_by(|a, b| rank_order(a.2.score, &a.0, b.2.score, &b.0).then(b.1.cmp(&a.1)));
        keyed.truncate(k);
        let mut next = Vec::with_capacity(k);
        for (mut tokens, finished, c) in keyed {
            if finished {
                tokens.push(EOS);
            }
            let hyp = Hypothesis {
                tokens,
                log_prob: c.score,
                hidden: steps[c.parent].clone(),
                finished,
            };
            if finished {
                pool.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        pool.sort_by(|a, b| rank_order(a.log_prob, a.content(), b.log_prob, b.content()));
        live = next;
    }
    pool.truncate(k);
    Ok(pool
        .into_iter()
        .map(|h| Generated {
            tokens: h.content().to_vec(),
            log_prob: h.log_prob,
        })
        .collect())
}

/// Highest-probability allowed token at each step, ties to the lowest id.
pub fn greedy_decode<T: Real>(
    model: &Fcrg<T>,
    source_ids: &[usize],
    min_tokens: usize,
    max_len: usize,
) -> Result<Generated> {
    let config = DecodeConfig {
        beam_size: 1,
        min_tokens,
        max_len,
    };
    config.validate()?;
    let encoded = model.encode(source_ids)?;
    greedy_from(model, &encoded, &config)
}

fn greedy_from<T: Real>(
    model: &Fcrg<T>,
    encoded: &EncoderOutput<T>,
    config: &DecodeConfig,
) -> Result<Generated> {
    let mut tokens = Vec::new();
    let mut score = 0.0;
    let mut hidden = encoded.last.clone();
    loop {
        let prev = tokens.last().copied().unwrap_or(BOS);
        let step = model.decode_step(prev, &hidden, encoded)?;
        let lp = masked_log_probs(step.log_probs.data(), tokens.len(), config);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (tok, &l) in lp.iter().enumerate() {
            let s = score + l;
            if l > f64::NEG_INFINITY && s > best.0 {
                best = (s, tok);
            }
        }
        score = best.0;
        if best.1 == EOS {
            return Ok(Generated {
                tokens,
                log_prob: score,
            });
        }
        tokens.push(best.1);
        hidden = step.hidden;
    }
}

/// Beam search over many sources, in input order.
pub fn generate_all<T: Real>(
    model: &Fcrg<T>,
    sources: &[Vec<usize>],
    config: &DecodeConfig,
) -> Result<Vec<Vec<Generated>>> {
    sources
        .iter()
        .map(|s| beam_search(model, s, config))
        .collect()
}

#[cfg(test)]
mod tests;
