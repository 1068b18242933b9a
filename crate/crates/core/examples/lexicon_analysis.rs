//! Category scores of two small reply groups under the bundled lexicon,
//! compared with Mann-Whitney U tests.
//!
//! cargo run --example lexicon_analysis

use fcrg::analysis::{group_stats, mann_whitney_u, score_columns, Alternative, Lexicon};

fn docs(lines: &[&str]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

fn main() -> anyhow::Result<()> {
    let lexicon = Lexicon::demo();
    let checkers = docs(&[
        "this is not true it was debunked",
        "no that never happened",
        "it is false and it was shown to be false",
        "nothing about this is accurate",
        "that claim was never verified",
    ]);
    let others = docs(&[
        "wow amazing news today",
        "i love this so much",
        "great point thanks for sharing",
        "so true can not wait",
        "what a day",
    ]);
    for (name, group) in [("checkers", &checkers), ("others", &others)] {
        let s = group_stats(group, &lexicon)?;
        for (c, cat) in s.names.iter().enumerate() {
            println!(
                "{name}\t{cat}\tmean {:.4}\tvariance {:.5}",
                s.mean[c], s.variance[c]
            );
        }
    }
    let a = score_columns(&checkers, &lexicon);
    let b = score_columns(&others, &lexicon);
    for (c, cat) in lexicon.names().iter().enumerate() {
        let t = mann_whitney_u(&a[c], &b[c], Alternative::Greater)?;
        println!(
            "{cat}: U = {}, p(checkers > others) = {:.4} ({})",
            t.u,
            t.p_value,
            if t.exact { "exact" } else { "normal" }
        );
    }
    Ok(())
}
