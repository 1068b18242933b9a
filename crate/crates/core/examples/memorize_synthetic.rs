//! Trains a small model until it memorizes 32 synthetic pairs, then checks
//! that greedy decoding reproduces every reply.
//!
//! cargo run --release --example memorize_synthetic

use std::ops::ControlFlow;
use std::time::Instant;

use fcrg::corpus::{EncodedPair, Vocabulary, BOS, EOS};
use fcrg::decoding::greedy_decode;
use fcrg::model::{train_until, AttentionKind, Fcrg, ModelConfig};
use fcrg::tensor::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let words: Vec<String> = (0..46).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_tokens(&words);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs: Vec<EncodedPair> = (0..32)
        .map(|_| {
            let src = (0..rng.random_range(3..=6))
                .map(|_| rng.random_range(4..vocab.len()))
                .collect();
            let mut tgt = vec![BOS];
            tgt.extend((0..rng.random_range(2..=5)).map(|_| rng.random_range(4..vocab.len())));
            tgt.push(EOS);
            EncodedPair {
                source_ids: src,
                target_ids: tgt,
            }
        })
        .collect();
    let config = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 32,
        hidden_size: 64,
        output_size: 64,
        max_source_len: 6,
        max_target_len: 5,
        attention: AttentionKind::Dot,
        dropout: 0.0,
        seed: 3,
    };
    let mut model = Fcrg::<f32>::new(config)?;
    let tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 8,
        clip_norm: 5.0,
        max_epochs: 500,
        early_stop_patience: 500,
        seed: 5,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train_until(&mut model, &pairs, &pairs, &tc, |r| {
        let ppl = r.valid_nll.exp();
        if r.epoch % 10 == 0 {
            println!(
                "epoch {:3}  train nll {:.4}  ppl {:.4}",
                r.epoch, r.train_nll, ppl
            );
        }
        if ppl < 1.05 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let ppl = model.sequence_nll(&pairs)?.perplexity();
    let exact = pairs
        .iter()
        .filter(|p| {
            greedy_decode(&model, &p.source_ids, 0, 5)
                .map(|g| g.tokens == p.reply_ids())
                .unwrap_or(false)
        })
        .count();
    println!(
        "{} epochs in {:.1?}: perplexity {ppl:.4}, {exact}/32 replies reproduced",
        outcome.history.len(),
        start.elapsed()
    );
    Ok(())
}
