//! Beam search with and without a minimum response length on a briefly
//! trained toy model.
//!
//! cargo run --release --example beam_search

use std::ops::ControlFlow;

use fcrg::corpus::{EncodedPair, Vocabulary, BOS, EOS};
use fcrg::decoding::{beam_search, greedy_decode, DecodeConfig};
use fcrg::model::{train_until, AttentionKind, Fcrg, ModelConfig};
use fcrg::tensor::TrainConfig;

fn main() -> anyhow::Result<()> {
    let vocab = Vocabulary::from_tokens(["fake", "news", "false", "claim", "debunked", "source"]);
    let ids = |s: &str| -> Vec<usize> { s.split(' ').map(|w| vocab.id(w)).collect() };
    let wrap = |s: &str| -> Vec<usize> {
        let mut v = vec![BOS];
        v.extend(ids(s));
        v.push(EOS);
        v
    };
    let pairs = vec![
        EncodedPair {
            source_ids: ids("fake news"),
            target_ids: wrap("false claim"),
        },
        EncodedPair {
            source_ids: ids("news source"),
            target_ids: wrap("debunked source"),
        },
    ];
    let mut model = Fcrg::<f32>::new(ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 8,
        hidden_size: 16,
        output_size: 16,
        max_source_len: 4,
        max_target_len: 8,
        attention: AttentionKind::Bilinear,
        dropout: 0.0,
        seed: 1,
    })?;
    let cfg = TrainConfig {
        learning_rate: 0.02,
        batch_size: 2,
        max_epochs: 60,
        early_stop_patience: 60,
        ..TrainConfig::default()
    };
    train_until(&mut model, &pairs, &pairs, &cfg, |_| {
        ControlFlow::Continue(())
    })?;

    let src = ids("fake news");
    let greedy = greedy_decode(&model, &src, 0, 8)?;
    println!("greedy: {}", vocab.decode(&greedy.tokens).join(" "));
    for min_tokens in [0, 5] {
        let cfg = DecodeConfig {
            beam_size: 4,
            min_tokens,
            max_len: 8,
        };
        println!("beam K=4, min length {min_tokens}:");
        for g in beam_search(&model, &src, &cfg)? {
            println!(
                "  {:8.4}  {}",
                g.log_prob,
                vocab.decode(&g.tokens).join(" ")
            );
        }
    }
    Ok(())
}
