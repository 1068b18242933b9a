use super::MetricError;
use crate::stats::{midranks, normal_upper_tail, tie_groups};

/// Largest number of nonzero differences handled by the exact distribution.
pub const EXACT_LIMIT: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
    /// Every difference was zero; `p_value` is 1.
    pub degenerate: bool,
}

/// Number of sign assignments whose doubled positive-rank sum is at least
/// `threshold`, out of `2^n`.
fn exact_upper_tail(doubled_ranks: &[usize], threshold: usize) -> f64 {
    let total: usize = doubled_ranks.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    for &r in doubled_ranks {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let hits: f64 = counts[threshold.min(total + 1)..].iter().sum();
    hits / 2f64.powi(doubled_ranks.len() as i32)
}

struct SignedRanks {
    abs: Vec<f64>,
    ranks: Vec<f64>,
    w: f64,
}

fn signed_ranks(a: &[f64], b: &[f64]) -> SignedRanks {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    SignedRanks { abs, ranks, w }
}

fn normal_p(s: &SignedRanks) -> f64 {
    let n = s.abs.len() as f64;
    let tie_term: f64 = tie_groups(&s.abs)
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    normal_upper_tail((s.w - n * (n + 1.0) / 4.0 - 0.5) / var.sqrt())
}

/// One-sided signed-rank test of `a > b` on paired samples. Exact for up to
/// [`EXACT_LIMIT`] nonzero differences, otherwise the normal approximation
/// with tie and continuity corrections.
pub fn wilcoxon_one_sided(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let s = signed_ranks(a, b);
    let n = s.abs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n,
            p_value: 1.0,
            exact: true,
            degenerate: true,
        });
    }
    let (p_value, exact) = if n <= EXACT_LIMIT {
        let doubled: Vec<usize> = s.ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        (
            exact_upper_tail(&doubled, (2.0 * s.w).round() as usize),
            true,
        )
    } else {
        (normal_p(&s), false)
    };
    Ok(WilcoxonResult {
        statistic: s.w,
        n,
        p_value,
        exact,
        degenerate: false,
    })
}

/// Normal-approximation p-value regardless of sample size, for comparison
/// with the exact distribution.
pub fn wilcoxon_normal_p(a: &[f64], b: &[f64]) -> f64 {
    let s = signed_ranks(a, b);
    if s.abs.is_empty() {
        return 1.0;
    }
    normal_p(&s)
}
