//! Two-sample rank and proportion tests.

use crate::stats::{midranks, normal_upper_tail, tie_groups};

use super::AnalysisError;

/// Direction of a one-sided test: `Greater` asks whether the first sample
/// tends to be larger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alternative {
    Greater,
    Less,
}

/// Largest combined size handled by exact enumeration by default.
pub const MW_EXACT_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MannWhitney {
    /// `U` of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

struct Ranked {
    n_a: usize,
    n_b: usize,
    ranks: Vec<f64>,
    rank_sum_a: f64,
    ties: bool,
    tie_term: f64,
}

fn rank(a: &[f64], b: &[f64]) -> Ranked {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let groups = tie_groups(&pooled);
    Ranked {
        n_a: a.len(),
        n_b: b.len(),
        rank_sum_a: ranks[..a.len()].iter().sum(),
        ties: groups.iter().any(|&t| t > 1),
        tie_term: groups.iter().map(|&t| (t * t * t - t) as f64).sum(),
        ranks,
    }
}

fn u_of_a(r: &Ranked) -> f64 {
    r.rank_sum_a - (r.n_a * (r.n_a + 1)) as f64 / 2.0
}

fn check(a: &[f64], b: &[f64]) -> Result<(), AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Invalid(
            "Mann-Whitney needs two non-empty samples".into(),
        ));
    }
    Ok(())
}

/// `P(R_a >= observed)` over all ways of choosing which pooled ranks belong
/// to the first sample, conditional on the observed ties.
fn exact_upper(r: &Ranked, observed_rank_sum: f64) -> f64 {
    let doubled: Vec<usize> = r.ranks.iter().map(|x| (2.0 * x).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // ways[c][s]: subsets of size c with doubled rank sum s.
    let mut ways = vec![vec![0f64; total + 1]; r.n_a + 1];
    ways[0][0] = 1.0;
    for (i, &d) in doubled.iter().enumerate() {
        for c in (1..=r.n_a.min(i + 1)).rev() {
            let (lo, hi) = ways.split_at_mut(c);
            for s in (d..=total).rev() {
                hi[0][s] += lo[c - 1][s - d];
            }
        }
    }
    let threshold = (2.0 * observed_rank_sum).round() as usize;
    let row = &ways[r.n_a];
    let all: f64 = row.iter().sum();
    let hits: f64 = row[threshold.min(total + 1)..].iter().sum();
    hits / all
}

fn normal_upper(r: &Ranked, u: f64) -> f64 {
    let (na, nb) = (r.n_a as f64, r.n_b as f64);
    let n = na + nb;
    let correction = if n > 1.0 {
        r.tie_term / (n * (n - 1.0))
    } else {
        0.0
    };
    let var = na * nb / 12.0 * ((n + 1.0) - correction);
    if var <= 0.0 {
        return 1.0;
    }
    normal_upper_tail((u - na * nb / 2.0 - 0.5) / var.sqrt())
}

fn oriented(a: &[f64], b: &[f64], alt: Alternative) -> (Ranked, f64) {
    let r = match alt {
        Alternative::Greater => rank(a, b),
        Alternative::Less => rank(b, a),
    };
    let u = u_of_a(&r);
    (r, u)
}

/// One-sided Mann-Whitney U test, exact by enumeration when the combined
/// size is at most [`MW_EXACT_LIMIT`] and there are no ties, otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction. The reported `U` is always that of `a`.
pub fn mann_whitney_u(
    a: &[f64],
    b: &[f64],
    alt: Alternative,
) -> Result<MannWhitney, AnalysisError> {
    check(a, b)?;
    let u_a = u_of_a(&rank(a, b));
    let (r, u) = oriented(a, b, alt);
    let exact = r.n_a + r.n_b <= MW_EXACT_LIMIT && !r.ties;
    let p_value = if exact {
        exact_upper(&r, r.rank_sum_a)
    } else {
        normal_upper(&r, u)
    };
    Ok(MannWhitney {
        u: u_a,
        p_value,
        exact,
    })
}

/// Exact permutation p-value at any sample size (conditional on ties).
pub fn mann_whitney_exact_p(a: &[f64], b: &[f64], alt: Alternative) -> Result<f64, AnalysisError> {
    check(a, b)?;
    let (r, _) = oriented(a, b, alt);
    Ok(exact_upper(&r, r.rank_sum_a))
}

/// Normal-approximation p-value at any sample size.
pub fn mann_whitney_normal_p(a: &[f64], b: &[f64], alt: Alternative) -> Result<f64, AnalysisError> {
    check(a, b)?;
    let (r, u) = oriented(a, b, alt);
    Ok(normal_upper(&r, u))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
    /// Pooled proportion 0 or 1; `z` is 0 and `p_value` 1.
    pub degenerate: bool,
}

/// One-sided pooled two-proportion z test of `count_a / n_a` against
/// `count_b / n_b`.
pub fn two_proportion_z(
    count_a: u64,
    n_a: u64,
    count_b: u64,
    n_b: u64,
    alt: Alternative,
) -> Result<ZTest, AnalysisError> {
    if n_a == 0 || n_b == 0 || count_a > n_a || count_b > n_b {
        return Err(AnalysisError::Invalid(format!(
            "bad proportions {count_a}/{n_a} and {count_b}/{n_b}"
        )));
    }
    let pooled = (count_a + count_b) as f64 / (n_a + n_b) as f64;
    if pooled == 0.0 || pooled == 1.0 {
        return Ok(ZTest {
            z: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let z = (count_a as f64 / na - count_b as f64 / nb) / se;
    let p_value = match alt {
        Alternative::Greater => normal_upper_tail(z),
        Alternative::Less => normal_upper_tail(-z),
    };
    Ok(ZTest {
        z,
        p_value,
        degenerate: false,
    })
}
