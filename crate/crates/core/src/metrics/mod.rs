//! Response-quality metrics: word overlap (BLEU, ROUGE-L, METEOR-lite),
//! embedding similarity (Greedy Matching, Vector Extrema) and the paired
//! signed-rank test used to compare systems.

mod embedding;
mod meteor;
mod overlap;
mod wilcoxon;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::decoding::GenerationRecord;

pub use embedding::{extrema, greedy_matching, vector_extrema, EmbeddingTable};
pub use meteor::{align, meteor_from_alignment, meteor_lite, Alignment};
pub use overlap::{bleu, clipped_counts, lcs_len, rouge_l, sentence_bleu};
pub use wilcoxon::{wilcoxon_normal_p, wilcoxon_one_sided, WilcoxonResult, EXACT_LIMIT};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("length mismatch: {0} candidates vs {1} references")]
    LengthMismatch(usize, usize),
    #[error("BLEU order must be at least 1, got {0}")]
    BadOrder(usize),
    #[error("vector has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no reference for source {0}")]
    MissingReference(usize),
    #[error("no generated response for source {0}")]
    MissingGenerations(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Cosine similarity, clamped to `[-1, 1]`; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub const BLEU_ORDERS: [usize; 3] = [2, 3, 4];

#[derive(Clone, Debug, Default)]
pub struct EvalConfig {
    /// Report the mean of smoothed sentence-level BLEU instead of pooled
    /// corpus BLEU.
    pub sentence_bleu: bool,
}

/// Scores of one source, averaged over its responses.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceScores {
    pub source_index: usize,
    pub responses: usize,
    /// Smoothed sentence-level BLEU-2/3/4.
    pub bleu: [f64; 3],
    pub rouge_l: f64,
    pub meteor: f64,
    pub greedy: Option<f64>,
    pub extrema: Option<f64>,
}

/// All scores lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub per_source: Vec<SourceScores>,
    pub bleu: [f64; 3],
    pub rouge_l: f64,
    pub meteor: f64,
    pub greedy: Option<f64>,
    pub extrema: Option<f64>,
    pub responses: usize,
    /// Responses whose embedding metrics were undefined.
    pub skipped_embedding: usize,
    /// Responses with negative Vector Extrema, clamped to 0.
    pub negative_extrema: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Scores each response against its source's reference, averages per source
/// and then over sources. Corpus BLEU pools counts over every
/// (response, reference) pair.
pub fn evaluate(
    generations: &[GenerationRecord],
    references: &[Vec<String>],
    table: Option<&EmbeddingTable>,
    config: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    if references.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut by_source: BTreeMap<usize, Vec<&GenerationRecord>> = BTreeMap::new();
    for g in generations {
        if g.source_index >= references.len() {
            return Err(MetricError::MissingReference(g.source_index));
        }
        by_source.entry(g.source_index).or_default().push(g);
    }
    let mut per_source = Vec::with_capacity(references.len());
    let mut pooled_c: Vec<Vec<String>> = Vec::new();
    let mut pooled_r: Vec<Vec<String>> = Vec::new();
    let (mut skipped, mut negative) = (0, 0);
    for (i, reference) in references.iter().enumerate() {
        let mut responses = by_source
            .remove(&i)
            .ok_or(MetricError::MissingGenerations(i))?;
        responses.sort_by_key(|g| g.rank);
        let mut bleu_s = [0.0; 3];
        let (mut rouge, mut met) = (0.0, 0.0);
        let mut greedy = Vec::new();
        let mut ext = Vec::new();
        for g in &responses {
            let c = &g.tokens;
            for (slot, &n) in bleu_s.iter_mut().zip(&BLEU_ORDERS) {
                *slot += sentence_bleu(c, reference, n);
            }
            rouge += rouge_l(c, reference);
            met += meteor_lite(c, reference);
            if let Some(t) = table {
                match (
                    greedy_matching(c, reference, t),
                    vector_extrema(c, reference, t),
                ) {
                    (Some(gm), Some(ve)) => {
                        greedy.push(gm.clamp(0.0, 1.0));
                        if ve < 0.0 {
                            negative += 1;
                        }
                        ext.push(ve.max(0.0));
                    }
                    _ => skipped += 1,
                }
            }
            pooled_c.push(c.clone());
            pooled_r.push(reference.clone());
        }
        let k = responses.len() as f64;
        per_source.push(SourceScores {
            source_index: i,
            responses: responses.len(),
            bleu: bleu_s.map(|b| b / k),
            rouge_l: rouge / k,
            meteor: met / k,
            greedy: mean(greedy),
            extrema: mean(ext),
        });
    }
    let bleu_scores = if config.sentence_bleu {
        [0, 1, 2].map(|j| mean(per_source.iter().map(|s| s.bleu[j])).unwrap_or(0.0))
    } else {
        let mut out = [0.0; 3];
        for (slot, &n) in out.iter_mut().zip(&BLEU_ORDERS) {
            *slot = bleu(&pooled_c, &pooled_r, n)?;
        }
        out
    };
    Ok(MetricReport {
        bleu: bleu_scores,
        rouge_l: mean(per_source.iter().map(|s| s.rouge_l)).unwrap_or(0.0),
        meteor: mean(per_source.iter().map(|s| s.meteor)).unwrap_or(0.0),
        greedy: mean(per_source.iter().filter_map(|s| s.greedy)),
        extrema: mean(per_source.iter().filter_map(|s| s.extrema)),
        responses: pooled_c.len(),
        skipped_embedding: skipped,
        negative_extrema: negative,
        per_source,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.3}", 100.0 * x))
}

const HEADER: &str = "BLEU-2\tBLEU-3\tBLEU-4\tROUGE-L\tMETEOR-lite\tGreedy\tExtrema";

/// One header line and one row of scores on a 0-100 scale.
pub fn format_report(report: &MetricReport) -> String {
    let mut out = format!("{HEADER}\n");
    let cells = [
        Some(report.bleu[0]),
        Some(report.bleu[1]),
        Some(report.bleu[2]),
        Some(report.rouge_l),
        Some(report.meteor),
        report.greedy,
        report.extrema,
    ];
    let row: Vec<String> = cells.into_iter().map(pct).collect();
    out.push_str(&row.join("\t"));
    out.push('\n');
    out
}

/// Per-source scores on a 0-100 scale, BLEU columns sentence-level.
pub fn format_per_source(report: &MetricReport) -> String {
    let mut out = format!("source_index\tresponses\t{HEADER}\n");
    for s in &report.per_source {
        let cells = [
            Some(s.bleu[0]),
            Some(s.bleu[1]),
            Some(s.bleu[2]),
            Some(s.rouge_l),
            Some(s.meteor),
            s.greedy,
            s.extrema,
        ];
        let row: Vec<String> = cells.into_iter().map(pct).collect();
        writeln!(
            out,
            "{}\t{}\t{}",
            s.source_index,
            s.responses,
            row.join("\t")
        )
        .expect("write to string");
    }
    out
}
