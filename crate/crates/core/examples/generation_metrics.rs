//! Word-overlap and embedding metrics on a handful of responses.
//!
//! cargo run --example generation_metrics

use fcrg::decoding::GenerationRecord;
use fcrg::metrics::{
    bleu, evaluate, format_report, greedy_matching, meteor_lite, rouge_l, sentence_bleu,
    vector_extrema, EmbeddingTable, EvalConfig,
};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

const VECTORS: &str = "\
this 0.1 0.9 0.0
claim 0.8 0.1 0.2
is 0.1 0.8 0.1
false 0.9 0.0 0.4
untrue 0.85 0.05 0.45
completely 0.2 0.3 0.9
";

fn main() -> anyhow::Result<()> {
    let reference = toks("this claim is false");
    let candidates = [
        "this claim is false",
        "this claim is untrue",
        "false claim",
        "completely untrue",
    ];
    let table = EmbeddingTable::parse(VECTORS)?;
    println!("candidate\tBLEU-2\tsBLEU-2\tROUGE-L\tMETEOR\tgreedy\textrema");
    for c in candidates {
        let c = toks(c);
        println!(
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            c.join(" "),
            bleu(
                std::slice::from_ref(&c),
                std::slice::from_ref(&reference),
                2
            )?,
            sentence_bleu(&c, &reference, 2),
            rouge_l(&c, &reference),
            meteor_lite(&c, &reference),
            greedy_matching(&c, &reference, &table).unwrap_or(f64::NAN),
            vector_extrema(&c, &reference, &table).unwrap_or(f64::NAN),
        );
    }

    let generations: Vec<GenerationRecord> = candidates
        .iter()
        .enumerate()
        .map(|(r, c)| GenerationRecord {
            source_index: 0,
            rank: r + 1,
            log_prob: -(r as f64),
            tokens: toks(c),
        })
        .collect();
    let report = evaluate(
        &generations,
        &[reference],
        Some(&table),
        &EvalConfig::default(),
    )?;
    print!(
        "\nall four responses for one source:\n{}",
        format_report(&report)
    );
    Ok(())
}
