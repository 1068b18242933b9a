use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn small_lexicon() -> Lexicon {
    Lexicon::parse("1\tipron\n2\tnegate\n3\tfocuspast\n%\nit\t1\nnot\t2\ndebunk*\t2,3\nwas\t3\n")
        .unwrap()
}

#[test]
fn category_scores() {
    let lex = small_lexicon();
    let s = category_score(&toks("it is fake"), &lex).unwrap();
    assert_abs_diff_eq!(s[0], 1.0 / 3.0, epsilon = 1e-15);
    assert_eq!(&s[1..], &[0.0, 0.0]);
    assert_eq!(lex.categories_of("debunked"), vec![1, 2]);
    assert_eq!(lex.categories_of("debunk"), vec![1, 2]);
    assert_eq!(lex.categories_of("debun"), Vec::<usize>::new());
    assert_eq!(lex.categories_of("IT"), vec![0]);
    assert_eq!(
        category_score(&toks("cat dog"), &lex).unwrap(),
        vec![0.0; 3]
    );
    assert!(category_score::<String>(&[], &lex).is_none());
    // One token in two categories: the per-category sum can exceed 1.
    let s = category_score(&toks("debunked"), &lex).unwrap();
    assert!(s.iter().sum::<f64>() > 1.0);
}

#[test]
fn lexicon_parse_errors_carry_line_numbers() {
    let cases = [
        ("1\ta\n%\nx\t2\n", 3, "not declared"),
        ("1\ta\n%\nde*bunk\t1\n", 3, "only allowed at the end"),
        ("x\ta\n%\n", 1, "bad category id"),
        ("1\ta\n1\tb\n%\n", 2, "declared twice"),
        ("1\ta\n%\n*\t1\n", 3, "empty pattern"),
        ("1\ta\n%\nword\n", 3, "two tab-separated"),
    ];
    for (text, line, needle) in cases {
        match Lexicon::parse(text) {
            Err(AnalysisError::Parse { line: l, msg, .. }) => {
                assert_eq!(l, line, "{text:?}");
                assert!(msg.contains(needle), "{msg}");
            }
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(Lexicon::parse("1\ta\n").is_err());
}

#[test]
fn demo_lexicon_shape() {
    let lex = Lexicon::demo();
    assert_eq!(lex.names(), &["ipron", "negate", "swear", "focuspast"]);
    let s = category_score(&toks("it was not debunked"), &lex).unwrap();
    assert_abs_diff_eq!(s[0], 0.25);
    assert_abs_diff_eq!(s[1], 0.25);
    assert_abs_diff_eq!(s[3], 0.5);
}

#[test]
fn group_stats_examples() {
    let lex = small_lexicon();
    let same = vec![toks("it is"), toks("it is")];
    let st = group_stats(&same, &lex).unwrap();
    assert_eq!(st.variance, vec![0.0; 3]);
    let two = vec![toks("cat"), toks("it")];
    let st = group_stats(&two, &lex).unwrap();
    assert_abs_diff_eq!(st.mean[0], 0.5);
    assert_abs_diff_eq!(st.variance[0], 0.25);
    assert!(group_stats(&[toks("it")], &lex).is_err());
    let with_empty = vec![toks("it"), vec![], toks("cat")];
    let st = group_stats(&with_empty, &lex).unwrap();
    assert_eq!((st.n, st.skipped), (2, 1));
}

#[test]
fn group_stats_matches_two_pass() {
    let lex = Lexicon::demo();
    let words = [
        "it", "not", "was", "damn", "fake", "news", "debunked", "that", "url", "is",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let docs: Vec<Vec<String>> = (0..500)
        .map(|_| {
            let n = rng.random_range(1..15);
            (0..n)
                .map(|_| words[rng.random_range(0..words.len())].to_string())
                .collect()
        })
        .collect();
    let st = group_stats(&docs, &lex).unwrap();
    let cols = score_columns(&docs, &lex);
    for (c, col) in cols.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert_abs_diff_eq!(st.mean[c], mean, epsilon = 1e-12);
        assert_abs_diff_eq!(st.variance[c], var, epsilon = 1e-12);
    }
}

#[test]
fn lda_single_topic_is_smoothed_unigram() {
    let docs = vec![toks("a b a"), toks("c a")];
    let cfg = LdaConfig {
        topics: 1,
        iterations: 3,
        ..LdaConfig::default()
    };
    let m = lda_fit(&docs, &cfg).unwrap();
    let (n, v, b) = (5.0, 3.0, cfg.beta);
    for (w, count) in [("a", 3.0), ("b", 1.0), ("c", 1.0)] {
        let id = m.word_id(w).unwrap();
        assert_abs_diff_eq!(
            m.topic_word(0, id),
            (count + b) / (n + v * b),
            epsilon = 1e-15
        );
    }
    let top = m.top_words(3);
    assert_eq!(top[0][0].0, "a");
    // b and c tie; lower id wins.
    assert_eq!(top[0][1].0, "b");
}

#[test]
fn lda_site_weights_by_hand() {
    let docs = vec![toks("a b"), toks("a")];
    let cfg = LdaConfig {
        topics: 2,
        alpha: Some(0.5),
        beta: 0.1,
        iterations: 1,
        seed: 3,
    };
    let m = TopicModel::new(&docs, &cfg).unwrap();
    let z = m.assignments().to_vec();
    // Token 0 of document 0 is `a`; recount everything else.
    let tokens = [("a", 0usize, z[0][0]), ("b", 0, z[0][1]), ("a", 1, z[1][0])];
    let weights = m.site_weights(0, 0);
    for t in 0..2 {
        let others = |pred: &dyn Fn(&str, usize, usize) -> bool| {
            tokens
                .iter()
                .enumerate()
                .filter(|(i, (word, d, k))| *i != 0 && pred(word, *d, *k) && *k == t)
                .count() as f64
        };
        let ndk = others(&|_, d, _| d == 0);
        let nkw = others(&|word, _, _| word == "a");
        let nk = others(&|_, _, _| true);
        let want = (ndk + 0.5) * (nkw + 0.1) / (nk + 2.0 * 0.1);
        assert_abs_diff_eq!(weights[t], want, epsilon = 1e-15);
    }
}

#[test]
fn lda_counts_stay_consistent_and_runs_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs: Vec<Vec<String>> = (0..30)
        .map(|_| {
            (0..rng.random_range(1..10))
                .map(|_| format!("w{}", rng.random_range(0..12)))
                .collect()
        })
        .collect();
    let cfg = LdaConfig {
        topics: 3,
        iterations: 20,
        ..LdaConfig::default()
    };
    let mut m = TopicModel::new(&docs, &cfg).unwrap();
    m.check_consistency().unwrap();
    for _ in 0..cfg.iterations {
        m.sweep();
        m.check_consistency().unwrap();
    }
    let again = lda_fit(&docs, &cfg).unwrap();
    assert_eq!(m.assignments(), again.assignments());
    let other = lda_fit(
        &docs,
        &LdaConfig {
            seed: 99,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_ne!(m.assignments(), other.assignments());
}

#[test]
fn lda_rejects_bad_input() {
    let cfg = LdaConfig::default();
    assert!(TopicModel::new(&[toks("a"), vec![]], &cfg).is_err());
    assert!(TopicModel::new::<String>(&[], &cfg).is_err());
    assert!(TopicModel::new(
        &[toks("a")],
        &LdaConfig {
            topics: 0,
            ..cfg.clone()
        }
    )
    .is_err());
    assert!(TopicModel::new(
        &[toks("a")],
        &LdaConfig {
            iterations: 0,
            ..cfg
        }
    )
    .is_err());
}

/// Enumerates every choice of positions for the first sample.
fn enumerate_mw(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = crate::stats::midranks(&pooled);
    let observed: f64 = ranks[..a.len()].iter().sum();
    let n = pooled.len();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        total += 1;
        let s: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if s >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

#[test]
fn mann_whitney_worked_example() {
    let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Alternative::Greater).unwrap();
    assert!(r.exact);
    assert_eq!(r.u, 9.0);
    assert_abs_diff_eq!(r.p_value, 0.05, epsilon = 1e-15);
    let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Alternative::Less).unwrap();
    assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-15);
    let same = mann_whitney_u(&[1.0, 2.0, 2.0], &[1.0, 2.0, 2.0], Alternative::Greater).unwrap();
    assert!(same.p_value >= 0.5);
    assert!(mann_whitney_u(&[], &[1.0], Alternative::Greater).is_err());
}

#[test]
fn mann_whitney_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let na = rng.random_range(1..7);
        let nb = rng.random_range(1..7);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0..8) as f64).collect();
        let want = enumerate_mw(&a, &b);
        assert_abs_diff_eq!(
            mann_whitney_exact_p(&a, &b, Alternative::Greater).unwrap(),
            want,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            mann_whitney_exact_p(&a, &b, Alternative::Less).unwrap(),
            enumerate_mw(&b, &a),
            epsilon = 1e-12
        );
        let ua = mann_whitney_u(&a, &b, Alternative::Greater).unwrap().u;
        let ub = mann_whitney_u(&b, &a, Alternative::Greater).unwrap().u;
        assert_abs_diff_eq!(ua + ub, (na * nb) as f64, epsilon = 1e-12);
    }
}

fn tie_free_sample(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut values: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
    for i in (1..values.len()).rev() {
        values.swap(i, rng.random_range(0..=i));
    }
    let shift = rng.random_range(0.0..6.0);
    let a = values[..n].iter().map(|v| v + shift).collect();
    (a, values[n..].to_vec())
}

#[test]
fn mann_whitney_normal_close_to_exact_at_8_plus_8() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let (a, b) = tie_free_sample(&mut rng, 8);
        let exact = mann_whitney_exact_p(&a, &b, Alternative::Greater).unwrap();
        let normal = mann_whitney_normal_p(&a, &b, Alternative::Greater).unwrap();
        assert!((exact - normal).abs() < 0.02, "{exact} vs {normal}");
    }
}

#[test]
fn two_proportion_examples() {
    let eq = two_proportion_z(30, 100, 30, 100, Alternative::Greater).unwrap();
    assert_eq!(eq.z, 0.0);
    assert_abs_diff_eq!(eq.p_value, 0.5, epsilon = 1e-15);
    let r = two_proportion_z(571, 10000, 90, 10000, Alternative::Greater).unwrap();
    let p = 661.0 / 20000.0;
    let z = (0.0571 - 0.009) / (p * (1.0 - p) * 2.0 / 10000.0f64).sqrt();
    assert_abs_diff_eq!(r.z, z, epsilon = 1e-9);
    assert!(r.z > 0.0 && r.p_value < 0.001);
    let swapped = two_proportion_z(90, 10000, 571, 10000, Alternative::Greater).unwrap();
    assert_abs_diff_eq!(swapped.z, -r.z, epsilon = 1e-12);
    let less = two_proportion_z(90, 10000, 571, 10000, Alternative::Less).unwrap();
    assert_abs_diff_eq!(less.p_value, r.p_value, epsilon = 1e-15);
    let d = two_proportion_z(0, 10, 0, 20, Alternative::Greater).unwrap();
    assert!(d.degenerate && d.p_value == 1.0);
    assert!(two_proportion_z(11, 10, 0, 20, Alternative::Greater).is_err());
}

#[test]
fn similarity_examples() {
    let mut t = EmbeddingTable::new(2);
    t.insert("x", vec![1.0, 0.0]).unwrap();
    t.insert("y", vec![0.0, 1.0]).unwrap();
    assert_eq!(mean_pool(&toks("x y"), &t).unwrap(), vec![0.5, 0.5]);
    assert_abs_diff_eq!(
        doc_similarity(&toks("x y"), &toks("x y"), &t).unwrap(),
        1.0,
        epsilon = 1e-12
    );
    assert_eq!(doc_similarity(&toks("x"), &toks("y"), &t).unwrap(), 0.0);
    assert!(doc_similarity(&toks("zz"), &toks("y"), &t).is_none());
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn length_share_buckets() {
    let items = [
        (10, 50),
        (20, 60),
        (15, 70),
        (0, 1),
        (9, 2),
        (5, 3),
        (21, 0),
        (30, 100),
    ];
    let r = length_share_test(&items).unwrap();
    assert!(r.exact);
    assert_abs_diff_eq!(r.p_value, 1.0 / binom(6, 3), epsilon = 1e-15);
    let same = [(3, 5), (12, 5), (4, 7), (11, 7)];
    assert!(length_share_test(&same).unwrap().p_value >= 0.5);
    assert!(matches!(
        length_share_test(&[(3, 1), (21, 4)]),
        Err(AnalysisError::EmptyBucket("long [10,20]"))
    ));
    assert!(matches!(
        length_share_test(&[(10, 1)]),
        Err(AnalysisError::EmptyBucket("short [0,9]"))
    ));
}

#[test]
fn analyze_two_corpora() {
    let mk = |o: &str, r: &str, s: u64| RawPair::new(o, r).unwrap().with_shares(s);
    let fc = vec![
        mk("big claim", "it was not true, debunked here url", 40),
        mk(
            "another claim",
            "that is false and it was debunked before",
            30,
        ),
        mk("third claim", "no this never happened", 2),
        mk("fourth", "not true", 1),
    ];
    let random = vec![
        mk("hello", "great game last night", 0),
        mk("wow", "love this so much", 5),
        mk("hmm", "see you tomorrow friend", 1),
    ];
    let corpora = vec![("fc".to_string(), fc), ("random".to_string(), random)];
    let cfg = AnalysisConfig {
        lda: LdaConfig {
            topics: 2,
            iterations: 20,
            ..LdaConfig::default()
        },
        top_words: 3,
    };
    let rep = analyze_corpora(
        &corpora,
        &Lexicon::demo(),
        &Gazetteer::default(),
        None,
        &cfg,
    )
    .unwrap();
    assert_eq!(rep.groups.len(), 2);
    assert_eq!(rep.category_tests.len(), 4);
    let negate = rep
        .category_tests
        .iter()
        .find(|t| t.category == "negate")
        .unwrap();
    assert!(negate.p_greater < negate.p_less);
    let text = format_analysis_report(&rep);
    assert!(text.starts_with("# categories\n"));
    for section in ["# mann_whitney", "# length_shares", "# topics"] {
        assert!(text.contains(section), "{section}");
    }
    let again = format_analysis_report(
        &analyze_corpora(
            &corpora,
            &Lexicon::demo(),
            &Gazetteer::default(),
            None,
            &cfg,
        )
        .unwrap(),
    );
    assert_eq!(text, again);
}

proptest! {
    #[test]
    fn scores_are_fractions(words in proptest::collection::vec("[a-z]{1,6}", 1..20)) {
        let lex = Lexicon::demo();
        for s in category_score(&words, &lex).unwrap() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn mw_u_identity(
        a in proptest::collection::vec(0u8..10, 1..15),
        b in proptest::collection::vec(0u8..10, 1..15),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ua = mann_whitney_u(&a, &b, Alternative::Greater).unwrap();
        let ub = mann_whitney_u(&b, &a, Alternative::Greater).unwrap();
        prop_assert!((ua.u + ub.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ua.p_value));
    }
}
