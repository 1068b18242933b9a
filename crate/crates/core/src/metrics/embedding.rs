use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{cosine, MetricError};
use crate::corpus::vocab::{Vocabulary, RESERVED};
use crate::model::{names, Fcrg};
use crate::tensor::Real;

/// Word vectors of one fixed dimension. Lookups of absent tokens return
/// `None` and such tokens are skipped by the metrics.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        token: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<(), MetricError> {
        if vector.len() != self.dim {
            return Err(MetricError::Dimension {
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Columns of a model's embedding matrix, one per non-reserved token.
    pub fn from_model<T: Real>(model: &Fcrg<T>, vocab: &Vocabulary) -> Result<Self, MetricError> {
        let emb = model
            .params()
            .value(names::EMBEDDING)
            .map_err(|e| MetricError::Invalid(e.to_string()))?;
        let (d, v) = emb.dims2();
        let mut table = Self::new(d);
        for id in RESERVED.len()..v.min(vocab.len()) {
            let col = emb.column_values(id).iter().map(|x| x.as_f64()).collect();
            table.insert(vocab.token(id).expect("id below vocab size"), col)?;
        }
        Ok(table)
    }

    /// `token v1 .. vd` per line, space separated.
    pub fn parse(text: &str) -> Result<Self, MetricError> {
        let mut table: Option<Self> = None;
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| MetricError::Parse {
                    line: lineno,
                    msg: format!("bad number: {e}"),
                })?;
            if values.is_empty() {
                return Err(MetricError::Parse {
                    line: lineno,
                    msg: "token without a vector".into(),
                });
            }
            let t = table.get_or_insert_with(|| Self::new(values.len()));
            t.insert(token, values).map_err(|e| MetricError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        }
        table.ok_or(MetricError::EmptyCorpus)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = fs::read_to_string(path)
            .map_err(|e| MetricError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            MetricError::Parse { line, msg } => {
                MetricError::Invalid(format!("{}: line {line}: {msg}", path.display()))
            }
            other => other,
        })
    }

    fn vectors<'a, S: AsRef<str>>(&'a self, tokens: &[S]) -> Vec<&'a [f64]> {
        tokens.iter().filter_map(|t| self.get(t.as_ref())).collect()
    }
}

fn directed(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| cosine(x, y))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / a.len() as f64
}

/// Symmetric greedy matching. `None` when either side has no in-table token.
pub fn greedy_matching<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    table: &EmbeddingTable,
) -> Option<f64> {
    let a = table.vectors(candidate);
    let b = table.vectors(reference);
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some((directed(&a, &b) + directed(&b, &a)) / 2.0)
}

/// Per dimension, the entry of largest magnitude (sign kept; the first one
/// wins ties).
pub fn extrema(vectors: &[&[f64]]) -> Vec<f64> {
    let dim = vectors.first().map_or(0, |v| v.len());
    (0..dim)
        .map(|k| {
            vectors.iter().map(|v| v[k]).fold(
                0.0,
                |best: f64, x| if x.abs() > best.abs() { x } else { best },
            )
        })
        .collect()
}

/// Cosine of the extrema vectors, in `[-1, 1]`; zero when either extrema
/// vector is zero. `None` when a side has no in-table token.
pub fn vector_extrema<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    table: &EmbeddingTable,
) -> Option<f64> {
    let a = table.vectors(candidate);
    let b = table.vectors(reference);
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some(cosine(&extrema(&a), &extrema(&b)))
}
