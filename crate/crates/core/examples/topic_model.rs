//! Collapsed Gibbs LDA on a synthetic two-topic corpus.
//!
//! cargo run --release --example topic_model

use fcrg::analysis::{lda_fit, LdaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let topics = [
        ["vaccine", "dose", "virus", "trial", "immune"],
        ["ballot", "vote", "poll", "count", "fraud"],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let docs: Vec<Vec<&str>> = (0..150)
        .map(|_| {
            let mix: f64 = rng.random();
            (0..15)
                .map(|_| {
                    let t = usize::from(rng.random::<f64>() >= mix);
                    topics[t][rng.random_range(0..5)]
                })
                .collect()
        })
        .collect();
    let cfg = LdaConfig {
        topics: 2,
        alpha: Some(0.1),
        iterations: 300,
        ..LdaConfig::default()
    };
    let model = lda_fit(&docs, &cfg)?;
    model.check_consistency().map_err(anyhow::Error::msg)?;
    for (k, words) in model.top_words(5).iter().enumerate() {
        let list: Vec<String> = words.iter().map(|(w, p)| format!("{w} {p:.3}")).collect();
        println!("topic {k}: {}", list.join(", "));
    }
    Ok(())
}
