//! Normalizes a few raw tweet/reply pairs, builds a vocabulary and splits
//! the pairs.
//!
//! cargo run --example preprocess_corpus

use fcrg::corpus::{
    build_vocabulary, encode_pair, parse_dataset, prepare, split_dataset, Gazetteer, SeqLimits,
    SplitSpec,
};

const RAW: &str = "\
BREAKING: Obama signed it!! https://t.co/abc via @newsbot\t@newsbot This is FALSE, see https://snopes.com/x\t12
the moon landing was faked #truth\tNo it was not. Read http://nasa.gov/apollo @user1\t3
Obama says the water is poisoned\t@user2 @user3 that claim is false , obama never said that\t0
vaccines cause autism\tthis has been debunked many times https://t.co/zzz\t41
";

fn main() -> anyhow::Result<()> {
    let gazetteer = Gazetteer::new(["obama"]);
    let pairs = parse_dataset(&RAW.repeat(3))?;
    for p in &pairs[..4] {
        println!("{:?}", prepare(&p.original_text, &gazetteer));
        println!("  -> {:?}", prepare(&p.reply_text, &gazetteer));
    }

    let tokens: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| {
            [
                prepare(&p.original_text, &gazetteer),
                prepare(&p.reply_text, &gazetteer),
            ]
        })
        .collect();
    let vocab = build_vocabulary(tokens.iter().map(Vec::as_slice), 2)?;
    println!(
        "\nvocabulary ({} entries): {:?}",
        vocab.len(),
        vocab.tokens()
    );

    let encoded = encode_pair(&pairs[2], &vocab, &gazetteer, SeqLimits::default())?;
    println!(
        "pair 2 ids: {:?} -> {:?}",
        encoded.source_ids, encoded.target_ids
    );

    let split = split_dataset(
        &pairs,
        &SplitSpec {
            train: 0.5,
            validation: 0.25,
            test: 0.25,
            seed: 1,
        },
    )?;
    println!(
        "split: {} train / {} validation / {} test",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}
