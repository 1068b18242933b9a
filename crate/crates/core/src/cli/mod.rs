//! The `fcrg` command line: one subcommand per pipeline stage. Every
//! subcommand writes its outputs and `resolved_config.txt` into the run
//! directory given with `--run-dir`.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analysis::{analyze_corpora, format_analysis_report, AnalysisConfig, Lexicon};
use crate::corpus::{
    build_vocabulary, encode_pair, prepare, read_dataset, split_dataset, write_dataset, Gazetteer,
    RawPair, SeqLimits, Vocabulary,
};
use crate::decoding::{generate_all, read_generations, write_generations};
use crate::metrics::{evaluate, format_per_source, format_report, EmbeddingTable, EvalConfig};
use crate::model::{format_history, random_pairs, train, AttentionKind, Fcrg};

pub use config::{ConfigError, RunConfig};

pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

#[derive(Debug, Parser)]
#[command(
    name = "fcrg",
    version,
    about = "Fact-checking response generation pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-key override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a dataset, build the vocabulary and split it.
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        /// One person name per line.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train on a preprocessed directory's train/validation splits.
    Train {
        /// Directory written by `preprocess`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Beam-search responses for every source in a file.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to `vocab.tsv` beside the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Dataset file (first column used) or one source text per line.
        #[arg(long)]
        sources: PathBuf,
        /// Beam size K; overrides `decode.beam_size`.
        #[arg(long)]
        beam_size: Option<usize>,
        /// Minimum response length τ; overrides `decode.min_tokens`.
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a generations file against references.
    Evaluate {
        #[arg(long)]
        generations: PathBuf,
        /// Dataset file (second column used) or one reference per line.
        #[arg(long)]
        references: PathBuf,
        /// Word vectors, `token v1 .. vd` per line.
        #[arg(long, conflicts_with = "embedding_checkpoint")]
        embeddings: Option<PathBuf>,
        /// Use a checkpoint's embedding matrix as the word vectors.
        #[arg(long)]
        embedding_checkpoint: Option<PathBuf>,
        /// Vocabulary for `--embedding-checkpoint`; defaults to `vocab.tsv` beside it.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Report mean smoothed sentence BLEU instead of corpus BLEU.
        #[arg(long)]
        sentence_bleu: bool,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Lexicon, topic and significance analyses of reply corpora.
    Analyze {
        /// Dataset file, optionally `name=path`; repeatable. Later corpora
        /// are compared against the first.
        #[arg(long = "corpus", required = true)]
        corpora: Vec<String>,
        /// Lexicon file; the bundled demonstration lexicon if omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Number of LDA topics; overrides `lda.topics`.
        #[arg(long)]
        topics: Option<usize>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference gradient check of both attention variants.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn prepare_run(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::resolve(common.config.as_deref(), &common.set)?;
    fs::create_dir_all(&common.run_dir)
        .with_context(|| format!("creating {}", common.run_dir.display()))?;
    write(&common.run_dir.join(RESOLVED_CONFIG), &cfg.to_text())?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gazetteer(path: Option<&Path>) -> Result<Gazetteer> {
    match path {
        Some(p) => Gazetteer::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Gazetteer::default()),
    }
}

/// Non-blank lines of a text file with their line numbers; for tab-separated
/// lines only column `field` is kept.
pub fn read_texts(path: &Path, field: usize) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cell = if line.contains('\t') {
            line.split('\t').nth(field).with_context(|| {
                format!(
                    "{}: line {}: missing column {}",
                    path.display(),
                    n + 1,
                    field + 1
                )
            })?
        } else {
            line
        };
        out.push((n + 1, cell.to_string()));
    }
    Ok(out)
}

fn ints(values: impl Iterator<Item = usize> + Clone) -> (usize, usize, f64) {
    let n = values.clone().count().max(1);
    let min = values.clone().min().unwrap_or(0);
    let max = values.clone().max().unwrap_or(0);
    (min, max, values.sum::<usize>() as f64 / n as f64)
}

pub fn cmd_preprocess(
    dataset: &Path,
    gazetteer_path: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let cfg = prepare_run(common)?;
    let gaz = gazetteer(gazetteer_path)?;
    let raw = read_dataset(dataset)?;
    let mut kept = Vec::new();
    let mut tokens = Vec::new();
    let mut dropped = 0usize;
    for pair in &raw {
        let src = prepare(&pair.original_text, &gaz);
        let reply = prepare(&pair.reply_text, &gaz);
        if src.is_empty() || reply.is_empty() {
            dropped += 1;
            continue;
        }
        let mut p = RawPair::new(src.join(" "), reply.join(" "))?;
        p.share_count = pair.share_count;
        p.label = pair.label;
        kept.push(p);
        tokens.push((src, reply));
    }
    let vocab = build_vocabulary(
        tokens
            .iter()
            .flat_map(|(s, r)| [s.as_slice(), r.as_slice()]),
        cfg.min_count,
    )?;
    let split = split_dataset(&kept, &cfg.split)?;
    let dir = &common.run_dir;
    write_dataset(&dir.join("normalized.tsv"), &kept)?;
    write_dataset(&dir.join("train.tsv"), &split.train)?;
    write_dataset(&dir.join("validation.tsv"), &split.validation)?;
    write_dataset(&dir.join("test.tsv"), &split.test)?;
    vocab.save(&dir.join("vocab.tsv"))?;

    let (smin, smax, smean) = ints(tokens.iter().map(|(s, _)| s.len()));
    let (rmin, rmax, rmean) = ints(tokens.iter().map(|(_, r)| r.len()));
    let mut stats = String::from("statistic\tvalue\n");
    let rows: Vec<(&str, String)> = vec![
        ("pairs_read", raw.len().to_string()),
        ("pairs_kept", kept.len().to_string()),
        ("pairs_dropped_empty", dropped.to_string()),
        ("vocab_size", vocab.len().to_string()),
        ("vocab_size_without_reserved", (vocab.len() - 4).to_string()),
        ("source_tokens_min", smin.to_string()),
        ("source_tokens_max", smax.to_string()),
        ("source_tokens_mean", format!("{smean:.3}")),
        ("reply_tokens_min", rmin.to_string()),
        ("reply_tokens_max", rmax.to_string()),
        ("reply_tokens_mean", format!("{rmean:.3}")),
        ("train_pairs", split.train.len().to_string()),
        ("validation_pairs", split.validation.len().to_string()),
        ("test_pairs", split.test.len().to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(stats, "{k}\t{v}");
    }
    write(&dir.join("stats.tsv"), &stats)?;
    eprint!("{stats}");
    Ok(())
}

fn encode_split(
    path: &Path,
    vocab: &Vocabulary,
    limits: SeqLimits,
) -> Result<Vec<crate::corpus::EncodedPair>> {
    let gaz = Gazetteer::default();
    read_dataset(path)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            encode_pair(p, vocab, &gaz, limits)
                .with_context(|| format!("{}: pair {}", path.display(), i + 1))
        })
        .collect()
}

pub fn cmd_train(data: &Path, common: &Common) -> Result<()> {
    let cfg = prepare_run(common)?;
    let vocab = Vocabulary::load(&data.join("vocab.tsv"))?;
    let limits = SeqLimits {
        max_source_len: cfg.model.max_source_len,
        max_target_len: cfg.model.max_target_len,
    };
    let train_pairs = encode_split(&data.join("train.tsv"), &vocab, limits)?;
    let valid_pairs = encode_split(&data.join("validation.tsv"), &vocab, limits)?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.vocab_size = vocab.len();
    let mut model = Fcrg::<f32>::new(model_cfg)?;
    let outcome = train(&mut model, &train_pairs, &valid_pairs, &cfg.train, |r| {
        eprintln!(
            "epoch {}\ttrain_nll {:.4}\tvalid_nll {:.4}{}",
            r.epoch,
            r.train_nll,
            r.valid_nll,
            if r.improved { "\t*" } else { "" }
        );
    })?;
    let dir = &common.run_dir;
    model.save(&dir.join("model.ckpt"), outcome.best_epoch)?;
    vocab.save(&dir.join("vocab.tsv"))?;
    write(&dir.join("history.tsv"), &format_history(&outcome.history))?;
    eprintln!(
        "best epoch {} (valid nll {:.4}){}",
        outcome.best_epoch,
        outcome.best_valid_nll,
        if outcome.stopped_early {
            ", stopped early"
        } else {
            ""
        }
    );
    Ok(())
}

fn vocab_beside(checkpoint: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("vocab.tsv")
    })
}

pub struct GenerateArgs<'a> {
    pub checkpoint: &'a Path,
    pub vocab: Option<&'a Path>,
    pub sources: &'a Path,
    pub beam_size: Option<usize>,
    pub min_tokens: Option<usize>,
    pub gazetteer: Option<&'a Path>,
}

pub fn cmd_generate(args: &GenerateArgs<'_>, common: &Common) -> Result<()> {
    let mut common = common.clone();
    if let Some(k) = args.beam_size {
        common.set.push(format!("decode.beam_size={k}"));
    }
    if let Some(t) = args.min_tokens {
        common.set.push(format!("decode.min_tokens={t}"));
    }
    let cfg = prepare_run(&common)?;
    let (model, _) = Fcrg::<f32>::load(args.checkpoint)?;
    let vocab = Vocabulary::load(&vocab_beside(args.checkpoint, args.vocab))?;
    if vocab.len() != model.config().vocab_size {
        bail!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            model.config().vocab_size
        );
    }
    let gaz = gazetteer(args.gazetteer)?;
    let mut sources = Vec::new();
    for (line, text) in read_texts(args.sources, 0)? {
        let toks = prepare(&text, &gaz);
        if toks.is_empty() {
            bail!(
                "{}: line {line}: source is empty after normalization",
                args.sources.display()
            );
        }
        let mut ids = vocab.encode(&toks);
        ids.truncate(model.config().max_source_len);
        sources.push(ids);
    }
    let results = generate_all(&model, &sources, &cfg.decode)?;
    write_generations(&common.run_dir.join("generations.tsv"), &results, &vocab)?;
    eprintln!(
        "{} sources, {} responses",
        results.len(),
        results.iter().map(Vec::len).sum::<usize>()
    );
    Ok(())
}

pub struct EvaluateArgs<'a> {
    pub generations: &'a Path,
    pub references: &'a Path,
    pub embeddings: Option<&'a Path>,
    pub embedding_checkpoint: Option<&'a Path>,
    pub vocab: Option<&'a Path>,
    pub sentence_bleu: bool,
    pub gazetteer: Option<&'a Path>,
}

pub fn cmd_evaluate(args: &EvaluateArgs<'_>, common: &Common) -> Result<()> {
    prepare_run(common)?;
    let gens = read_generations(args.generations)?;
    let gaz = gazetteer(args.gazetteer)?;
    let refs: Vec<Vec<String>> = read_texts(args.references, 1)?
        .into_iter()
        .map(|(_, t)| prepare(&t, &gaz))
        .collect();
    let table = match (args.embeddings, args.embedding_checkpoint) {
        (Some(p), _) => Some(EmbeddingTable::load(p)?),
        (None, Some(ck)) => {
            let (model, _) = Fcrg::<f32>::load(ck)?;
            let vocab = Vocabulary::load(&vocab_beside(ck, args.vocab))?;
            Some(EmbeddingTable::from_model(&model, &vocab)?)
        }
        (None, None) => None,
    };
    let report = evaluate(
        &gens,
        &refs,
        table.as_ref(),
        &EvalConfig {
            sentence_bleu: args.sentence_bleu,
        },
    )?;
    let text = format_report(&report);
    write(&common.run_dir.join("metrics.tsv"), &text)?;
    write(
        &common.run_dir.join("per_source.tsv"),
        &format_per_source(&report),
    )?;
    print!("{text}");
    if report.skipped_embedding > 0 || report.negative_extrema > 0 {
        eprintln!(
            "{} responses without in-table tokens skipped by embedding metrics; {} negative extrema clamped to 0",
            report.skipped_embedding, report.negative_extrema
        );
    }
    Ok(())
}

pub struct AnalyzeArgs<'a> {
    pub corpora: &'a [String],
    pub lexicon: Option<&'a Path>,
    pub topics: Option<usize>,
    pub embeddings: Option<&'a Path>,
    pub gazetteer: Option<&'a Path>,
}

pub fn cmd_analyze(args: &AnalyzeArgs<'_>, common: &Common) -> Result<()> {
    let mut common = common.clone();
    if let Some(k) = args.topics {
        common.set.push(format!("lda.topics={k}"));
    }
    let cfg = prepare_run(&common)?;
    let lexicon = match args.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::demo(),
    };
    let gaz = gazetteer(args.gazetteer)?;
    let table = args.embeddings.map(EmbeddingTable::load).transpose()?;
    let mut corpora = Vec::new();
    for spec in args.corpora {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let n = p
                    .file_stem()
                    .map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                (n, p)
            }
        };
        corpora.push((name, read_dataset(&path)?));
    }
    let report = analyze_corpora(
        &corpora,
        &lexicon,
        &gaz,
        table.as_ref(),
        &AnalysisConfig {
            lda: cfg.lda.clone(),
            top_words: cfg.top_words,
        },
    )?;
    write(
        &common.run_dir.join("analysis.tsv"),
        &format_analysis_report(&report),
    )?;
    Ok(())
}

/// Writes the per-parameter table and fails if any parameter fails.
pub fn cmd_gradcheck(common: &Common) -> Result<()> {
    let cfg = prepare_run(common)?;
    let mut out = String::from("attention\tparam\tcoords\tmax_rel_error\tmax_abs_error\tpassed\n");
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for kind in [AttentionKind::Dot, AttentionKind::Bilinear] {
        let mut mc = cfg.gradcheck_model.clone();
        mc.attention = kind;
        mc.dropout = 0.0;
        let pairs = random_pairs(&mc, cfg.gradcheck_pairs, cfg.gradcheck.seed);
        let mut model = Fcrg::<f64>::new(mc)?;
        let report = model.check_gradients(&pairs, &cfg.gradcheck)?;
        for p in &report.params {
            let _ = writeln!(
                out,
                "{kind}\t{}\t{}\t{:.3e}\t{:.3e}\t{}",
                p.name, p.coords_checked, p.max_rel_error, p.max_abs_error, p.passed
            );
            if !p.passed {
                failed.push(format!("{kind}:{}", p.name));
            }
        }
        worst = worst.max(report.max_rel_error());
    }
    write(&common.run_dir.join("gradcheck.tsv"), &out)?;
    eprintln!("max relative error {worst:.3e}");
    if !failed.is_empty() {
        bail!("gradient check failed for {}", failed.join(", "));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess {
            dataset,
            gazetteer,
            common,
        } => cmd_preprocess(dataset, gazetteer.as_deref(), common),
        Command::Train { data, common } => cmd_train(data, common),
        Command::Generate {
            checkpoint,
            vocab,
            sources,
            beam_size,
            min_tokens,
            gazetteer,
            common,
        } => cmd_generate(
            &GenerateArgs {
                checkpoint,
                vocab: vocab.as_deref(),
                sources,
                beam_size: *beam_size,
                min_tokens: *min_tokens,
                gazetteer: gazetteer.as_deref(),
            },
            common,
        ),
        Command::Evaluate {
            generations,
            references,
            embeddings,
            embedding_checkpoint,
            vocab,
            sentence_bleu,
            gazetteer,
            common,
        } => cmd_evaluate(
            &EvaluateArgs {
                generations,
                references,
                embeddings: embeddings.as_deref(),
                embedding_checkpoint: embedding_checkpoint.as_deref(),
                vocab: vocab.as_deref(),
                sentence_bleu: *sentence_bleu,
                gazetteer: gazetteer.as_deref(),
            },
            common,
        ),
        Command::Analyze {
            corpora,
            lexicon,
            topics,
            embeddings,
            gazetteer,
            common,
        } => cmd_analyze(
            &AnalyzeArgs {
                corpora,
                lexicon: lexicon.as_deref(),
                topics: *topics,
                embeddings: embeddings.as_deref(),
                gazetteer: gazetteer.as_deref(),
            },
            common,
        ),
        Command::Gradcheck { common } => cmd_gradcheck(common),
    }
}
