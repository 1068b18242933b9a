//! Corpus-linguistic analyses of reply corpora: lexicon category scores,
//! LDA topics, rank and proportion tests, document similarity and the
//! reply-length versus share-count comparison.

mod lda;
mod lexicon;
mod significance;

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{prepare, Gazetteer, RawPair};
use crate::metrics::{cosine, EmbeddingTable};

pub use lda::{lda_fit, LdaConfig, TopicModel};
pub use lexicon::{
    category_score, group_stats, score_columns, CategoryStats, Lexicon, DEMO_LEXICON,
};
pub use significance::{
    mann_whitney_exact_p, mann_whitney_normal_p, mann_whitney_u, two_proportion_z, Alternative,
    MannWhitney, ZTest, MW_EXACT_LIMIT,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
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
        source: io::Error,
    },
    #[error("{0} bucket is empty")]
    EmptyBucket(&'static str),
    #[error("{0}")]
    Invalid(String),
}

impl AnalysisError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            AnalysisError::Parse { line, msg, .. } => AnalysisError::Parse {
                file: Some(path.display().to_string()),
                line,
                msg,
            },
            other => other,
        }
    }
}

/// Component-wise mean of the in-table token vectors; `None` if no token is
/// in the table.
pub fn mean_pool<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t.as_ref())) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Cosine of mean-pooled word vectors, in `[-1, 1]`.
pub fn doc_similarity<S: AsRef<str>>(a: &[S], b: &[S], table: &EmbeddingTable) -> Option<f64> {
    Some(cosine(&mean_pool(a, table)?, &mean_pool(b, table)?))
}

pub const SHORT_BUCKET: (usize, usize) = (0, 9);
pub const LONG_BUCKET: (usize, usize) = (10, 20);

/// Tests whether replies of 10 to 20 tokens get more shares than replies of
/// at most 9 tokens. Items are `(token count, share count)`; lengths outside
/// both buckets are ignored.
pub fn length_share_test(items: &[(usize, u64)]) -> Result<MannWhitney, AnalysisError> {
    let in_bucket = |(lo, hi): (usize, usize)| -> Vec<f64> {
        items
            .iter()
            .filter(|(len, _)| (lo..=hi).contains(len))
            .map(|&(_, s)| s as f64)
            .collect()
    };
    let short = in_bucket(SHORT_BUCKET);
    let long = in_bucket(LONG_BUCKET);
    if long.is_empty() {
        return Err(AnalysisError::EmptyBucket("long [10,20]"));
    }
    if short.is_empty() {
        return Err(AnalysisError::EmptyBucket("short [0,9]"));
    }
    mann_whitney_u(&long, &short, Alternative::Greater)
}

/// `(reply token count, share count)` of the pairs that carry a share count.
pub fn reply_length_shares(pairs: &[RawPair], gazetteer: &Gazetteer) -> Vec<(usize, u64)> {
    pairs
        .iter()
        .filter_map(|p| {
            p.share_count
                .map(|s| (prepare(&p.reply_text, gazetteer).len(), s))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub lda: LdaConfig,
    /// Words listed per topic.
    pub top_words: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            lda: LdaConfig::default(),
            top_words: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimilaritySummary {
    pub mean: f64,
    pub pairs: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct GroupAnalysis {
    pub name: String,
    pub documents: usize,
    pub stats: CategoryStats,
    pub topics: Vec<Vec<(String, f64)>>,
    /// Original tweet versus reply.
    pub similarity: Option<SimilaritySummary>,
    /// `Err` holds the reason the test could not run.
    pub length_shares: Result<MannWhitney, String>,
}

/// Category comparison of the first group against another.
#[derive(Clone, Debug)]
pub struct CategoryTest {
    pub category: String,
    pub group_a: String,
    pub group_b: String,
    pub u: f64,
    pub p_greater: f64,
    pub p_less: f64,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub groups: Vec<GroupAnalysis>,
    pub category_tests: Vec<CategoryTest>,
}

/// Analyzes the replies of each named corpus; every later corpus is compared
/// against the first one category by category.
pub fn analyze_corpora(
    corpora: &[(String, Vec<RawPair>)],
    lexicon: &Lexicon,
    gazetteer: &Gazetteer,
    table: Option<&EmbeddingTable>,
    config: &AnalysisConfig,
) -> Result<AnalysisReport, AnalysisError> {
    if corpora.is_empty() {
        return Err(AnalysisError::Invalid("no corpus to analyze".into()));
    }
    let mut groups = Vec::new();
    let mut columns = Vec::new();
    for (name, pairs) in corpora {
        let docs: Vec<Vec<String>> = pairs
            .iter()
            .map(|p| prepare(&p.reply_text, gazetteer))
            .collect();
        let stats = group_stats(&docs, lexicon)?;
        let nonempty: Vec<Vec<String>> = docs.iter().filter(|d| !d.is_empty()).cloned().collect();
        let topics = lda_fit(&nonempty, &config.lda)?.top_words(config.top_words);
        let similarity = table.map(|t| {
            let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
            for (p, reply) in pairs.iter().zip(&docs) {
                match doc_similarity(&prepare(&p.original_text, gazetteer), reply, t) {
                    Some(s) => {
                        sum += s;
                        n += 1;
                    }
                    None => skipped += 1,
                }
            }
            SimilaritySummary {
                mean: if n > 0 { sum / n as f64 } else { f64::NAN },
                pairs: n,
                skipped,
            }
        });
        let shares: Vec<(usize, u64)> = pairs
            .iter()
            .zip(&docs)
            .filter_map(|(p, d)| p.share_count.map(|s| (d.len(), s)))
            .collect();
        let length_shares = length_share_test(&shares).map_err(|e| e.to_string());
        columns.push(score_columns(&docs, lexicon));
        groups.push(GroupAnalysis {
            name: name.clone(),
            documents: docs.len(),
            stats,
            topics,
            similarity,
            length_shares,
        });
    }
    let mut category_tests = Vec::new();
    for g in 1..groups.len() {
        for (c, category) in lexicon.names().iter().enumerate() {
            let (a, b) = (&columns[0][c], &columns[g][c]);
            let greater = mann_whitney_u(a, b, Alternative::Greater)?;
            let less = mann_whitney_u(a, b, Alternative::Less)?;
            category_tests.push(CategoryTest {
                category: category.clone(),
                group_a: groups[0].name.clone(),
                group_b: groups[g].name.clone(),
                u: greater.u,
                p_greater: greater.p_value,
                p_less: less.p_value,
                exact: greater.exact,
            });
        }
    }
    Ok(AnalysisReport {
        groups,
        category_tests,
    })
}

fn g(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6e}")
    }
}

/// Tab-separated report in `# section` blocks.
pub fn format_analysis_report(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# categories\ngroup\tcategory\tn\tmean\tvariance");
    for grp in &report.groups {
        let s = &grp.stats;
        for (c, name) in s.names.iter().enumerate() {
            let _ = writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                grp.name,
                name,
                s.n,
                g(s.mean[c]),
                g(s.variance[c])
            );
        }
    }
    if !report.category_tests.is_empty() {
        let _ = writeln!(
            w,
            "\n# mann_whitney\ncategory\tgroup_a\tgroup_b\tU\tp_greater\tp_less\tmethod"
        );
        for t in &report.category_tests {
            let _ = writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.category,
                t.group_a,
                t.group_b,
                t.u,
                g(t.p_greater),
                g(t.p_less),
                if t.exact { "exact" } else { "normal" }
            );
        }
    }
    let _ = writeln!(w, "\n# length_shares\ngroup\tU\tp_long_greater\tmethod");
    for grp in &report.groups {
        match &grp.length_shares {
            Ok(r) => {
                let method = if r.exact { "exact" } else { "normal" };
                let _ = writeln!(w, "{}\t{}\t{}\t{method}", grp.name, r.u, g(r.p_value));
            }
            Err(e) => {
                let _ = writeln!(w, "{}\tNA\tNA\t{e}", grp.name);
            }
        }
    }
    if report.groups.iter().any(|grp| grp.similarity.is_some()) {
        let _ = writeln!(w, "\n# similarity\ngroup\tmean_cosine\tpairs\tskipped");
        for grp in &report.groups {
            if let Some(s) = &grp.similarity {
                let _ = writeln!(w, "{}\t{}\t{}\t{}", grp.name, g(s.mean), s.pairs, s.skipped);
            }
        }
    }
    let _ = writeln!(w, "\n# topics\ngroup\ttopic\trank\tword\tprobability");
    for grp in &report.groups {
        for (k, words) in grp.topics.iter().enumerate() {
            for (r, (word, p)) in words.iter().enumerate() {
                let _ = writeln!(w, "{}\t{k}\t{}\t{word}\t{}", grp.name, r + 1, g(*p));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
