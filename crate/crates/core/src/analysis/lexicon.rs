//! LIWC-style dictionaries.
//!
//! ```text
//! 1	ipron
//! 2	negate
//! %
//! it	1
//! not	2
//! debunk*	2
//! ```
//!
//! Category ids are arbitrary non-negative integers. A pattern may end in a
//! single `*`, which matches any token starting with the rest of the
//! pattern (including the bare stem). Matching is case-insensitive.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::AnalysisError;

/// Lexicon shipped for demonstrations and tests.
pub const DEMO_LEXICON: &str = include_str!("demo_lexicon.txt");

#[derive(Clone, Debug)]
pub struct Lexicon {
    ids: Vec<u64>,
    names: Vec<String>,
    literals: HashMap<String, Vec<usize>>,
    prefixes: HashMap<String, Vec<usize>>,
}

fn err(line: usize, msg: impl Into<String>) -> AnalysisError {
    AnalysisError::Parse {
        file: None,
        line,
        msg: msg.into(),
    }
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let mut ids = Vec::new();
        let mut names = Vec::new();
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut literals: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: HashMap<String, Vec<usize>> = HashMap::new();
        let mut in_entries = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.trim() == "%" {
                if in_entries {
                    return Err(err(line_no, "second `%` separator"));
                }
                in_entries = true;
                continue;
            }
            let (left, right) = line
                .split_once('\t')
                .ok_or_else(|| err(line_no, "expected two tab-separated fields"))?;
            let (left, right) = (left.trim(), right.trim());
            if !in_entries {
                let id: u64 = left
                    .parse()
                    .map_err(|_| err(line_no, format!("bad category id `{left}`")))?;
                if right.is_empty() {
                    return Err(err(line_no, "empty category name"));
                }
                if index.insert(id, ids.len()).is_some() {
                    return Err(err(line_no, format!("category {id} declared twice")));
                }
                ids.push(id);
                names.push(right.to_string());
                continue;
            }
            let pattern = left.to_lowercase();
            let (stem, wildcard) = match pattern.strip_suffix('*') {
                Some(s) => (s.to_string(), true),
                None => (pattern.clone(), false),
            };
            if stem.is_empty() {
                return Err(err(line_no, "empty pattern"));
            }
            if stem.contains('*') {
                return Err(err(
                    line_no,
                    format!("`*` is only allowed at the end of `{left}`"),
                ));
            }
            let mut cats = Vec::new();
            for part in right.split(',') {
                let part = part.trim();
                let id: u64 = part
                    .parse()
                    .map_err(|_| err(line_no, format!("bad category id `{part}`")))?;
                let c = *index
                    .get(&id)
                    .ok_or_else(|| err(line_no, format!("category {id} is not declared")))?;
                cats.push(c);
            }
            let table = if wildcard {
                &mut prefixes
            } else {
                &mut literals
            };
            let slot = table.entry(stem).or_default();
            slot.extend(cats);
            slot.sort_unstable();
            slot.dedup();
        }
        if ids.is_empty() {
            return Err(err(0, "no categories declared"));
        }
        if !in_entries {
            return Err(err(0, "missing `%` separator"));
        }
        Ok(Self {
            ids,
            names,
            literals,
            prefixes,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = fs::read_to_string(path).map_err(|e| AnalysisError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_LEXICON).expect("demo lexicon parses")
    }

    pub fn num_categories(&self) -> usize {
        self.names.len()
    }

    /// Category names in declaration order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of the categories the token belongs to, ascending.
    pub fn categories_of(&self, token: &str) -> Vec<usize> {
        let token = token.to_lowercase();
        let mut out = BTreeSet::new();
        if let Some(c) = self.literals.get(&token) {
            out.extend(c.iter().copied());
        }
        for (end, _) in token
            .char_indices()
            .skip(1)
            .chain(std::iter::once((token.len(), ' ')))
        {
            if let Some(c) = self.prefixes.get(&token[..end]) {
                out.extend(c.iter().copied());
            }
        }
        out.into_iter().collect()
    }
}

/// Fraction of tokens hitting each category. `None` for an empty document.
pub fn category_score<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Option<Vec<f64>> {
    if tokens.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; lexicon.num_categories()];
    for t in tokens {
        for c in lexicon.categories_of(t.as_ref()) {
            counts[c] += 1;
        }
    }
    let n = tokens.len() as f64;
    Some(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population variance.
    pub variance: Vec<f64>,
    /// Documents scored.
    pub n: usize,
    /// Empty documents left out.
    pub skipped: usize,
}

/// Per-category mean and population variance of document scores,
/// accumulated in one streaming pass.
pub fn group_stats<S: AsRef<str>>(
    documents: &[Vec<S>],
    lexicon: &Lexicon,
) -> Result<CategoryStats, AnalysisError> {
    let k = lexicon.num_categories();
    let mut mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let (mut n, mut skipped) = (0usize, 0usize);
    for doc in documents {
        let Some(scores) = category_score(doc, lexicon) else {
            skipped += 1;
            continue;
        };
        n += 1;
        for (c, x) in scores.into_iter().enumerate() {
            let delta = x - mean[c];
            mean[c] += delta / n as f64;
            m2[c] += delta * (x - mean[c]);
        }
    }
    if n < 2 {
        return Err(AnalysisError::Invalid(format!(
            "category statistics need at least 2 non-empty documents, got {n}"
        )));
    }
    Ok(CategoryStats {
        names: lexicon.names().to_vec(),
        mean,
        variance: m2.into_iter().map(|v| (v / n as f64).max(0.0)).collect(),
        n,
        skipped,
    })
}

/// Per-category score columns, one inner vector per category, skipping empty
/// documents.
pub fn score_columns<S: AsRef<str>>(documents: &[Vec<S>], lexicon: &Lexicon) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::new(); lexicon.num_categories()];
    for doc in documents {
        if let Some(s) = category_score(doc, lexicon) {
            for (c, x) in s.into_iter().enumerate() {
                cols[c].push(x);
            }
        }
    }
    cols
}
