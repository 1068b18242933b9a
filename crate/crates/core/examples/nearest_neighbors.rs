//! Cosine nearest neighbours in a word-vector table, plus the table built
//! from a model's input embeddings.
//!
//! cargo run --example nearest_neighbors

use fcrg::corpus::Vocabulary;
use fcrg::metrics::{cosine, EmbeddingTable};
use fcrg::model::{AttentionKind, Fcrg, ModelConfig};

const VECTORS: &str = "\
fake 0.9 0.1 0.0 0.1
hoax 0.8 0.2 0.1 0.0
false 0.7 0.0 0.3 0.2
true -0.6 0.1 0.5 0.3
real -0.5 0.2 0.6 0.2
vote 0.0 0.9 -0.2 0.4
ballot 0.1 0.8 -0.3 0.5
moon 0.0 -0.2 0.1 0.9
mars 0.1 -0.3 0.0 0.8
";

fn neighbours<'a>(table: &EmbeddingTable, word: &str, words: &[&'a str]) -> Vec<(&'a str, f64)> {
    let v = table.get(word).expect("word in table");
    let mut sims: Vec<(&str, f64)> = words
        .iter()
        .filter(|w| **w != word)
        .filter_map(|w| Some((*w, cosine(v, table.get(w)?))))
        .collect();
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    sims
}

fn main() -> anyhow::Result<()> {
    let table = EmbeddingTable::parse(VECTORS)?;
    let words: Vec<&str> = VECTORS
        .lines()
        .filter_map(|l| l.split(' ').next())
        .collect();
    for w in ["fake", "vote", "moon", "true"] {
        let top: Vec<String> = neighbours(&table, w, &words)[..3]
            .iter()
            .map(|(o, s)| format!("{o} {s:.3}"))
            .collect();
        println!("{w}: {}", top.join(", "));
    }

    // `evaluate --embedding-checkpoint` uses the same kind of table, read
    // from the rows of a model's embedding matrix.
    let vocab = Vocabulary::from_tokens(words.iter().copied());
    let model = Fcrg::<f32>::new(ModelConfig {
        vocab_size: vocab.len(),
        ..ModelConfig::tiny(AttentionKind::Dot)
    })?;
    let learned = EmbeddingTable::from_model(&model, &vocab)?;
    println!(
        "\nfrom an untrained model: {} vectors of dimension {}; fake -> {}",
        learned.len(),
        learned.dim(),
        neighbours(&learned, "fake", &words)[0].0
    );
    Ok(())
}
