use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SUBJECTS: [&str; 6] = ["vaccine", "moon", "election", "water", "senator", "storm"];
const CLAIMS: [&str; 4] = ["causes harm", "was faked", "is rigged", "is poisoned"];
const VERDICTS: [&str; 4] = [
    "this is false",
    "no evidence for this",
    "debunked by experts",
    "not true at all",
];

fn dataset(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let s = SUBJECTS[i % SUBJECTS.len()];
        let c = CLAIMS[(i / 2) % CLAIMS.len()];
        let v = VERDICTS[(i / 3) % VERDICTS.len()];
        out.push_str(&format!(
            "the {s} {c} says @user{i}\t@user{i} {v} : the {s} claim http://x.co/{i}\t{}\n",
            i % 7
        ));
    }
    out
}

fn fcrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcrg"))
        .args(args)
        .output()
        .expect("run fcrg")
}

fn ok(args: &[&str]) -> String {
    let out = fcrg(args);
    assert!(
        out.status.success(),
        "fcrg {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: [&str; 14] = [
    "--set",
    "model.embed_dim=8",
    "--set",
    "model.hidden_size=8",
    "--set",
    "model.output_size=8",
    "--set",
    "train.max_epochs=2",
    "--set",
    "train.batch_size=8",
    "--set",
    "model.max_target_len=24",
    "--set",
    "model.max_source_len=24",
];

struct Runs {
    _tmp: TempDir,
    data: PathBuf,
    prep: PathBuf,
    train: PathBuf,
    gen: PathBuf,
}

fn pipeline() -> Runs {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("pairs.tsv");
    fs::write(&data, dataset(60)).unwrap();
    let prep = tmp.path().join("prep");
    ok(&["preprocess", "--dataset", p(&data), "--run-dir", p(&prep)]);
    let train = tmp.path().join("train");
    let mut args = vec!["train", "--data", p(&prep), "--run-dir", p(&train)];
    args.extend(TINY);
    ok(&args);
    let gen = tmp.path().join("gen");
    let ckpt = train.join("model.ckpt");
    let test_split = prep.join("test.tsv");
    let mut args = vec![
        "generate",
        "--checkpoint",
        p(&ckpt),
        "--sources",
        p(&test_split),
        "--beam-size",
        "3",
        "--min-tokens",
        "10",
        "--run-dir",
        p(&gen),
    ];
    args.extend(TINY);
    ok(&args);
    Runs {
        _tmp: tmp,
        data,
        prep,
        train,
        gen,
    }
}

#[test]
fn full_pipeline() {
    let r = pipeline();
    for f in [
        "normalized.tsv",
        "train.tsv",
        "validation.tsv",
        "test.tsv",
        "vocab.tsv",
        "stats.tsv",
        "resolved_config.txt",
    ] {
        assert!(r.prep.join(f).is_file(), "preprocess wrote {f}");
    }
    let stats = fs::read_to_string(r.prep.join("stats.tsv")).unwrap();
    assert!(stats.contains("pairs_read\t60"), "{stats}");
    for f in ["model.ckpt", "vocab.tsv", "history.tsv"] {
        assert!(r.train.join(f).is_file(), "train wrote {f}");
    }

    let gens = fs::read_to_string(r.gen.join("generations.tsv")).unwrap();
    let tests = fs::read_to_string(r.prep.join("test.tsv")).unwrap();
    let sources = tests.lines().filter(|l| !l.trim().is_empty()).count();
    assert!(sources > 0);
    let mut seen = 0;
    for line in gens.lines() {
        let f: Vec<&str> = line.splitn(4, '\t').collect();
        assert_eq!(f.len(), 4, "{line}");
        let rank: usize = f[1].parse().unwrap();
        assert!((1..=3).contains(&rank));
        let lp: f64 = f[2].parse().unwrap();
        assert!(lp <= 0.0);
        assert!(
            f[3].split_whitespace().count() >= 10,
            "short response: {line}"
        );
        seen += 1;
    }
    assert_eq!(seen, 3 * sources);

    // References scored against themselves.
    let perfect = r.gen.join("perfect.tsv");
    let body: String = tests
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| format!("{i}\t1\t0.0\t{}\n", l.split('\t').nth(1).unwrap()))
        .collect();
    fs::write(&perfect, body).unwrap();
    let eval = r.gen.join("eval");
    let ckpt = r.train.join("model.ckpt");
    let stdout = ok(&[
        "evaluate",
        "--generations",
        p(&perfect),
        "--references",
        p(&r.prep.join("test.tsv")),
        "--embedding-checkpoint",
        p(&ckpt),
        "--run-dir",
        p(&eval),
    ]);
    let metrics = fs::read_to_string(eval.join("metrics.tsv")).unwrap();
    assert_eq!(stdout, metrics);
    let mut lines = metrics.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let values: Vec<f64> = lines
        .next()
        .unwrap()
        .split('\t')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(header.len(), values.len(), "{metrics}");
    for (name, v) in header.iter().zip(&values) {
        if *name == "METEOR-lite" {
            // One chunk still pays the fragmentation penalty 0.5 / m^3.
            assert!(*v > 99.0 && *v < 100.0, "{name} = {v}");
        } else {
            assert!((v - 100.0).abs() < 1e-9, "{name} = {v}\n{metrics}");
        }
    }
    assert!(eval.join("per_source.tsv").is_file());

    let ana = r.gen.join("analyze");
    ok(&[
        "analyze",
        "--corpus",
        &format!("first={}", p(&r.data)),
        "--corpus",
        &format!("second={}", p(&r.prep.join("train.tsv"))),
        "--topics",
        "2",
        "--set",
        "lda.iterations=20",
        "--run-dir",
        p(&ana),
    ]);
    let report = fs::read_to_string(ana.join("analysis.tsv")).unwrap();
    for section in [
        "# categories",
        "# mann_whitney",
        "# length_shares",
        "# topics",
    ] {
        assert!(report.contains(section), "missing {section}");
    }

    let gc = r.gen.join("gradcheck");
    ok(&["gradcheck", "--run-dir", p(&gc)]);
    let table = fs::read_to_string(gc.join("gradcheck.tsv")).unwrap();
    assert!(
        table.lines().skip(1).all(|l| l.ends_with("true")),
        "{table}"
    );
}

#[test]
fn runs_are_deterministic() {
    let a = pipeline();
    let b = pipeline();
    for (x, y) in [
        (a.prep.join("train.tsv"), b.prep.join("train.tsv")),
        (a.prep.join("vocab.tsv"), b.prep.join("vocab.tsv")),
        (a.train.join("model.ckpt"), b.train.join("model.ckpt")),
        (a.train.join("history.tsv"), b.train.join("history.tsv")),
        (a.gen.join("generations.tsv"), b.gen.join("generations.tsv")),
    ] {
        assert_eq!(
            fs::read(&x).unwrap(),
            fs::read(&y).unwrap(),
            "{} differs",
            x.display()
        );
    }
}

#[test]
fn bad_input_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("pairs.tsv");
    fs::write(&data, dataset(12)).unwrap();
    let run = tmp.path().join("run");

    let out = fcrg(&[
        "preprocess",
        "--dataset",
        p(&data),
        "--run-dir",
        p(&run),
        "--set",
        "model.hiden_size=4",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.hiden_size"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "train.max_epochs = 2\ntrain.batch_size = many\n").unwrap();
    let out = fcrg(&[
        "preprocess",
        "--dataset",
        p(&data),
        "--run-dir",
        p(&run),
        "--config",
        p(&cfg),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 2") && err.contains("train.batch_size"),
        "{err}"
    );

    let broken = tmp.path().join("broken.tsv");
    fs::write(&broken, "only one field\n").unwrap();
    let out = fcrg(&["preprocess", "--dataset", p(&broken), "--run-dir", p(&run)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let gens = tmp.path().join("gens.tsv");
    fs::write(&gens, "0\tnot-a-rank\t0.0\tx\n").unwrap();
    let out = fcrg(&[
        "evaluate",
        "--generations",
        p(&gens),
        "--references",
        p(&data),
        "--run-dir",
        p(&run),
    ]);
    assert!(!out.status.success());
}
