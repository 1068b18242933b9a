//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnalysisError;

#[derive(Clone, Debug, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 5,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 17,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.topics == 0 {
            return Err(AnalysisError::Invalid(
                "lda topics must be at least 1".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(AnalysisError::Invalid(
                "lda iterations must be at least 1".into(),
            ));
        }
        if !(self.alpha() > 0.0 && self.beta > 0.0) {
            return Err(AnalysisError::Invalid(
                "lda alpha and beta must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sampler state. Word ids follow first appearance in the corpus.
#[derive(Clone, Debug)]
pub struct TopicModel {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    words: Vec<String>,
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    n_dk: Vec<Vec<u32>>,
    n_kw: Vec<Vec<u32>>,
    n_k: Vec<u32>,
    rng: ChaCha8Rng,
    sweeps: usize,
}

impl TopicModel {
    /// Random initial assignment; no sweep has run yet.
    pub fn new<S: AsRef<str>>(
        documents: &[Vec<S>],
        config: &LdaConfig,
    ) -> Result<Self, AnalysisError> {
        config.validate()?;
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut words = Vec::new();
        let mut docs = Vec::with_capacity(documents.len());
        for (d, doc) in documents.iter().enumerate() {
            if doc.is_empty() {
                return Err(AnalysisError::Invalid(format!("document {d} is empty")));
            }
            docs.push(
                doc.iter()
                    .map(|t| {
                        *index.entry(t.as_ref().to_string()).or_insert_with(|| {
                            words.push(t.as_ref().to_string());
                            words.len() - 1
                        })
                    })
                    .collect::<Vec<_>>(),
            );
        }
        if words.is_empty() {
            return Err(AnalysisError::Invalid("lda vocabulary is empty".into()));
        }
        let k = config.topics;
        let v = words.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut n_dk = vec![vec![0u32; k]; docs.len()];
        let mut n_kw = vec![vec![0u32; v]; k];
        let mut n_k = vec![0u32; k];
        let z = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d][t] += 1;
                        n_kw[t][w] += 1;
                        n_k[t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            alpha: config.alpha(),
            beta: config.beta,
            seed: config.seed,
            words,
            docs,
            z,
            n_dk,
            n_kw,
            n_k,
            rng,
            sweeps: 0,
        })
    }

    pub fn topics(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.n_dk
    }

    pub fn topic_word_counts(&self) -> &[Vec<u32>] {
        &self.n_kw
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.n_k
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    /// Unnormalized weights for resampling token `i` of document `d`, with
    /// that token's own assignment removed from the counts.
    pub fn site_weights(&self, d: usize, i: usize) -> Vec<f64> {
        let w = self.docs[d][i];
        let own = self.z[d][i];
        let vb = self.words.len() as f64 * self.beta;
        (0..self.k)
            .map(|t| {
                let sub = u32::from(t == own) as f64;
                let ndk = self.n_dk[d][t] as f64 - sub;
                let nkw = self.n_kw[t][w] as f64 - sub;
                let nk = self.n_k[t] as f64 - sub;
                (ndk + self.alpha) * (nkw + self.beta) / (nk + vb)
            })
            .collect()
    }

    /// One pass over every token in corpus order.
    pub fn sweep(&mut self) {
        let vb = self.words.len() as f64 * self.beta;
        let mut weights = vec![0.0; self.k];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.n_dk[d][old] -= 1;
                self.n_kw[old][w] -= 1;
                self.n_k[old] -= 1;
                let mut total = 0.0;
                for (t, slot) in weights.iter_mut().enumerate() {
                    let p = (self.n_dk[d][t] as f64 + self.alpha)
                        * (self.n_kw[t][w] as f64 + self.beta)
                        / (self.n_k[t] as f64 + vb);
                    total += p;
                    *slot = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = weights.iter().position(|&c| u < c).unwrap_or(self.k - 1);
                self.z[d][i] = new;
                self.n_dk[d][new] += 1;
                self.n_kw[new][w] += 1;
                self.n_k[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    /// Recounts everything from the assignments and compares.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut n_kw = vec![vec![0u32; self.words.len()]; self.k];
        for (d, (doc, zs)) in self.docs.iter().zip(&self.z).enumerate() {
            let mut n_dk = vec![0u32; self.k];
            for (&w, &t) in doc.iter().zip(zs) {
                n_dk[t] += 1;
                n_kw[t][w] += 1;
            }
            if n_dk != self.n_dk[d] {
                return Err(format!(
                    "document {d}: topic counts disagree with assignments"
                ));
            }
            let total: u32 = self.n_dk[d].iter().sum();
            if total as usize != doc.len() {
                return Err(format!(
                    "document {d}: topic counts sum to {total}, length {}",
                    doc.len()
                ));
            }
        }
        if n_kw != self.n_kw {
            return Err("topic-word counts disagree with assignments".into());
        }
        for t in 0..self.k {
            let total: u32 = self.n_kw[t].iter().sum();
            if total != self.n_k[t] {
                return Err(format!(
                    "topic {t}: word counts sum to {total}, total says {}",
                    self.n_k[t]
                ));
            }
        }
        Ok(())
    }

    /// Smoothed `p(w | k)`.
    pub fn topic_word(&self, k: usize, w: usize) -> f64 {
        let vb = self.words.len() as f64 * self.beta;
        (self.n_kw[k][w] as f64 + self.beta) / (self.n_k[k] as f64 + vb)
    }

    /// The `m` most probable words of every topic; ties go to the lower id.
    pub fn top_words(&self, m: usize) -> Vec<Vec<(String, f64)>> {
        (0..self.k)
            .map(|k| {
                let mut ids: Vec<usize> = (0..self.words.len()).collect();
                ids.sort_by(|&a, &b| self.n_kw[k][b].cmp(&self.n_kw[k][a]).then(a.cmp(&b)));
                ids.into_iter()
                    .take(m)
                    .map(|w| (self.words[w].clone(), self.topic_word(k, w)))
                    .collect()
            })
            .collect()
    }
}

pub fn lda_fit<S: AsRef<str>>(
    documents: &[Vec<S>],
    config: &LdaConfig,
) -> Result<TopicModel, AnalysisError> {
    let mut model = TopicModel::new(documents, config)?;
    for _ in 0..config.iterations {
        model.sweep();
    }
    Ok(model)
}
