use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::vocab::UNK;
use crate::corpus::Vocabulary;
use crate::model::{names, AttentionKind, ModelConfig};

fn small(v: usize, seed: u64, kind: AttentionKind) -> Fcrg<f64> {
    Fcrg::new(ModelConfig {
        vocab_size: v,
        embed_dim: 4,
        hidden_size: 5,
        output_size: 4,
        max_source_len: 8,
        max_target_len: 8,
        attention: kind,
        dropout: 0.0,
        seed,
    })
    .unwrap()
}

/// Every complete response up to `max_len` content tokens with its
/// probability under the same masking rules, best first.
fn enumerate(
    model: &Fcrg<f64>,
    src: &[usize],
    tau: usize,
    max_len: usize,
) -> Vec<(Vec<usize>, f64)> {
    fn rec(
        m: &Fcrg<f64>,
        enc: &crate::model::EncoderOutput<f64>,
        prefix: &mut Vec<usize>,
        h: &Tensor<f64>,
        lp: f64,
        tau: usize,
        max_len: usize,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        let prev = prefix.last().copied().unwrap_or(BOS);
        let step = m.decode_step(prev, h, enc).unwrap();
        let probs = step.log_probs.data();
        let allowed: Vec<usize> = if prefix.len() == max_len {
            vec![EOS]
        } else {
            (2..probs.len())
                .filter(|&k| k != EOS || prefix.len() >= tau)
                .collect()
        };
        let z: f64 = allowed.iter().map(|&k| probs[k].exp()).sum();
        for k in allowed {
            let l = lp + (probs[k].exp() / z).ln();
            if k == EOS {
                out.push((prefix.clone(), l));
            } else {
                prefix.push(k);
                rec(m, enc, prefix, &step.hidden, l, tau, max_len, out);
                prefix.pop();
            }
        }
    }
    let enc = model.encode(src).unwrap();
    let mut out = Vec::new();
    rec(
        model,
        &enc,
        &mut Vec::new(),
        &enc.last,
        0.0,
        tau,
        max_len,
        &mut out,
    );
    out.sort_by(|a, b| rank_order(a.1, &a.0, b.1, &b.0));
    out
}

#[test]
fn beam_matches_exhaustive_search() {
    for (seed, kind) in [(1, AttentionKind::Dot), (2, AttentionKind::Bilinear)] {
        let m = small(5, seed, kind);
        let src = [3, 4, 4];
        let all = enumerate(&m, &src, 0, 4);
        assert_eq!(all.len(), 31);
        let cfg = DecodeConfig {
            beam_size: 40,
            min_tokens: 0,
            max_len: 4,
        };
        let beam = beam_search(&m, &src, &cfg).unwrap();
        assert_eq!(beam.len(), all.len());
        for (g, (toks, lp)) in beam.iter().zip(&all) {
            assert_eq!(&g.tokens, toks);
            assert!((g.log_prob - lp).abs() < 1e-9);
        }
        let total: f64 = all.iter().map(|(_, lp)| lp.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn beam_top_k_is_prefix_of_exhaustive_ranking() {
    let m = small(6, 3, AttentionKind::Dot);
    let all = enumerate(&m, &[4, 5], 2, 4);
    let cfg = DecodeConfig {
        beam_size: all.len(),
        min_tokens: 2,
        max_len: 4,
    };
    let beam = beam_search(&m, &[4, 5], &cfg).unwrap();
    let got: Vec<&Vec<usize>> = beam.iter().map(|g| &g.tokens).collect();
    let want: Vec<&Vec<usize>> = all.iter().map(|(t, _)| t).collect();
    assert_eq!(got, want);
}

#[test]
fn min_tokens_always_respected() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let v = rng.random_range(5..12);
        let m = small(v, trial, AttentionKind::Dot);
        let src: Vec<usize> = (0..rng.random_range(1..6))
            .map(|_| rng.random_range(3..v))
            .collect();
        for tau in [0, 2, 5] {
            let cfg = DecodeConfig {
                beam_size: 3,
                min_tokens: tau,
                max_len: 7,
            };
            for g in beam_search(&m, &src, &cfg).unwrap() {
                assert!(g.tokens.len() >= tau && g.tokens.len() <= 7);
                assert!(g.tokens.iter().all(|&t| t >= UNK));
                assert!(g.log_prob <= 0.0);
            }
            assert!(greedy_decode(&m, &src, tau, 7).unwrap().tokens.len() >= tau);
        }
    }
}

#[test]
fn beam_of_one_equals_greedy() {
    for seed in 0..20 {
        let m = small(9, seed, AttentionKind::Bilinear);
        for tau in [0, 3] {
            let cfg = DecodeConfig {
                beam_size: 1,
                min_tokens: tau,
                max_len: 6,
            };
            let beam = beam_search(&m, &[5, 6, 7], &cfg).unwrap();
            let greedy = greedy_decode(&m, &[5, 6, 7], tau, 6).unwrap();
            assert_eq!(beam, vec![greedy]);
        }
    }
}

fn uniform(v: usize) -> Fcrg<f64> {
    let mut m = small(v, 1, AttentionKind::Dot);
    m.params_mut()
        .value_mut(names::W_S)
        .unwrap()
        .data_mut()
        .iter_mut()
        .for_each(|x| *x = 0.0);
    m
}

#[test]
fn greedy_on_uniform_model_takes_lowest_allowed_id() {
    let m = uniform(7);
    assert!(greedy_decode(&m, &[4], 0, 5).unwrap().tokens.is_empty());
    let g = greedy_decode(&m, &[4], 3, 5).unwrap();
    assert_eq!(g.tokens, vec![UNK; 3]);
}

#[test]
fn ranking_is_sorted_and_deterministic() {
    let m = small(10, 5, AttentionKind::Dot);
    let cfg = DecodeConfig {
        beam_size: 6,
        min_tokens: 1,
        max_len: 5,
    };
    let a = beam_search(&m, &[4, 8], &cfg).unwrap();
    assert_eq!(a, beam_search(&m, &[4, 8], &cfg).unwrap());
    assert_eq!(a.len(), 6);
    for w in a.windows(2) {
        assert!(rank_order(w[0].log_prob, &w[0].tokens, w[1].log_prob, &w[1].tokens).is_lt());
    }
}

#[test]
fn config_validation() {
    let m = small(6, 1, AttentionKind::Dot);
    let bad = DecodeConfig {
        beam_size: 0,
        ..DecodeConfig::default()
    };
    assert!(beam_search(&m, &[4], &bad).is_err());
    assert!(greedy_decode(&m, &[4], 5, 5).is_err());
}

#[test]
fn generation_file_round_trip() {
    let vocab = Vocabulary::from_tokens(["fake", "news"]);
    let results = vec![
        vec![
            Generated {
                tokens: vec![4, 5],
                log_prob: -1.25,
            },
            Generated {
                tokens: vec![],
                log_prob: -2.5,
            },
        ],
        vec![Generated {
            tokens: vec![5],
            log_prob: -0.5,
        }],
    ];
    let text = format_generations(&results, &vocab);
    assert_eq!(text.lines().next().unwrap(), "0\t1\t-1.250000\tfake news");
    let back = parse_generations(&text).unwrap();
    assert_eq!(back.len(), 3);
    assert_eq!(back[1].rank, 2);
    assert!(back[1].tokens.is_empty());
    assert_eq!(back[2].source_index, 1);
    let err = parse_generations("0\t1\t-1\tok\nx\t1\t0\tbad\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}
