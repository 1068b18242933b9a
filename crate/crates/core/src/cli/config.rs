//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! model.hidden_size = 64
//! train.max_epochs = 10
//! decode.min_tokens = 5
//! ```
//!
//! Unknown keys are errors. [`RunConfig::to_text`] lists every key with its
//! resolved value and parses back to the same configuration.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::LdaConfig;
use crate::corpus::SplitSpec;
use crate::decoding::DecodeConfig;
use crate::model::{AttentionKind, ModelConfig};
use crate::tensor::{GradCheckConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config")?;
        if let Some(l) = self.line {
            write!(f, " line {l}")?;
        }
        if let Some(k) = &self.key {
            write!(f, " key `{k}`")?;
        }
        write!(f, ": {}", self.msg)
    }
}

impl std::error::Error for ConfigError {}

fn key_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        key: Some(key.to_string()),
        line: None,
        msg: msg.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| key_err(key, format!("cannot parse `{value}`")))
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// `vocab_size` is taken from the vocabulary at training time.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub min_count: u64,
    pub split: SplitSpec,
    pub lda: LdaConfig,
    pub top_words: usize,
    pub gradcheck: GradCheckConfig,
    /// Model used by `gradcheck`; attention kind is ignored (both are checked).
    pub gradcheck_model: ModelConfig,
    pub gradcheck_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            min_count: 3,
            split: SplitSpec::default(),
            lda: LdaConfig::default(),
            top_words: 10,
            gradcheck: GradCheckConfig::default(),
            gradcheck_model: ModelConfig::tiny(AttentionKind::Dot),
            gradcheck_pairs: 3,
        }
    }
}

fn set_model(m: &mut ModelConfig, field: &str, key: &str, v: &str) -> Result<(), ConfigError> {
    match field {
        "vocab_size" => m.vocab_size = parse(key, v)?,
        "embed_dim" => m.embed_dim = parse(key, v)?,
        "hidden_size" => m.hidden_size = parse(key, v)?,
        "output_size" => m.output_size = parse(key, v)?,
        "max_source_len" => m.max_source_len = parse(key, v)?,
        "max_target_len" => m.max_target_len = parse(key, v)?,
        "attention" => {
            m.attention = v
                .parse()
                .map_err(|e: crate::model::ModelError| key_err(key, e.to_string()))?
        }
        "dropout" => m.dropout = parse(key, v)?,
        "seed" => m.seed = parse(key, v)?,
        _ => return Err(key_err(key, "unknown key")),
    }
    Ok(())
}

fn model_pairs(prefix: &str, m: &ModelConfig, with_vocab: bool) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if with_vocab {
        out.push(("vocab_size", m.vocab_size.to_string()));
    }
    out.extend([
        ("embed_dim", m.embed_dim.to_string()),
        ("hidden_size", m.hidden_size.to_string()),
        ("output_size", m.output_size.to_string()),
        ("max_source_len", m.max_source_len.to_string()),
        ("max_target_len", m.max_target_len.to_string()),
        ("attention", m.attention.to_string()),
        ("dropout", m.dropout.to_string()),
        ("seed", m.seed.to_string()),
    ]);
    out.into_iter()
        .map(|(k, v)| (format!("{prefix}{k}"), v))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        if let Some(field) = key.strip_prefix("gradcheck.model.") {
            return set_model(&mut self.gradcheck_model, field, key, v);
        }
        if let Some(field) = key.strip_prefix("model.") {
            if field == "vocab_size" {
                return Err(key_err(key, "set from the vocabulary; not configurable"));
            }
            return set_model(&mut self.model, field, key, v);
        }
        match key {
            "train.learning_rate" => self.train.learning_rate = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.clip_norm" => self.train.clip_norm = parse(key, v)?,
            "train.beta1" => self.train.beta1 = parse(key, v)?,
            "train.beta2" => self.train.beta2 = parse(key, v)?,
            "train.epsilon" => self.train.epsilon = parse(key, v)?,
            "train.max_epochs" => self.train.max_epochs = parse(key, v)?,
            "train.early_stop_patience" => self.train.early_stop_patience = parse(key, v)?,
            "train.seed" => self.train.seed = parse(key, v)?,
            "decode.beam_size" => self.decode.beam_size = parse(key, v)?,
            "decode.min_tokens" => self.decode.min_tokens = parse(key, v)?,
            "decode.max_len" => self.decode.max_len = parse(key, v)?,
            "data.min_count" => self.min_count = parse(key, v)?,
            "data.train_fraction" => self.split.train = parse(key, v)?,
            "data.validation_fraction" => self.split.validation = parse(key, v)?,
            "data.test_fraction" => self.split.test = parse(key, v)?,
            "data.split_seed" => self.split.seed = parse(key, v)?,
            "lda.topics" => self.lda.topics = parse(key, v)?,
            "lda.alpha" => {
                self.lda.alpha = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "lda.beta" => self.lda.beta = parse(key, v)?,
            "lda.iterations" => self.lda.iterations = parse(key, v)?,
            "lda.seed" => self.lda.seed = parse(key, v)?,
            "analysis.top_words" => self.top_words = parse(key, v)?,
            "gradcheck.step" => self.gradcheck.step = parse(key, v)?,
            "gradcheck.rel_tolerance" => self.gradcheck.rel_tolerance = parse(key, v)?,
            "gradcheck.abs_floor" => self.gradcheck.abs_floor = parse(key, v)?,
            "gradcheck.coords_per_param" => self.gradcheck.coords_per_param = parse(key, v)?,
            "gradcheck.seed" => self.gradcheck.seed = parse(key, v)?,
            "gradcheck.pairs" => self.gradcheck_pairs = parse(key, v)?,
            _ => return Err(key_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = model_pairs("model.", &self.model, false);
        let t = &self.train;
        let s = &self.split;
        let g = &self.gradcheck;
        let rest: Vec<(&str, String)> = vec![
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.clip_norm", t.clip_norm.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.epsilon", t.epsilon.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            (
                "train.early_stop_patience",
                t.early_stop_patience.to_string(),
            ),
            ("train.seed", t.seed.to_string()),
            ("decode.beam_size", self.decode.beam_size.to_string()),
            ("decode.min_tokens", self.decode.min_tokens.to_string()),
            ("decode.max_len", self.decode.max_len.to_string()),
            ("data.min_count", self.min_count.to_string()),
            ("data.train_fraction", s.train.to_string()),
            ("data.validation_fraction", s.validation.to_string()),
            ("data.test_fraction", s.test.to_string()),
            ("data.split_seed", s.seed.to_string()),
            ("lda.topics", self.lda.topics.to_string()),
            (
                "lda.alpha",
                self.lda
                    .alpha
                    .map_or_else(|| "auto".to_string(), |a| a.to_string()),
            ),
            ("lda.beta", self.lda.beta.to_string()),
            ("lda.iterations", self.lda.iterations.to_string()),
            ("lda.seed", self.lda.seed.to_string()),
            ("analysis.top_words", self.top_words.to_string()),
            ("gradcheck.step", g.step.to_string()),
            ("gradcheck.rel_tolerance", g.rel_tolerance.to_string()),
            ("gradcheck.abs_floor", g.abs_floor.to_string()),
            ("gradcheck.coords_per_param", g.coords_per_param.to_string()),
            ("gradcheck.seed", g.seed.to_string()),
            ("gradcheck.pairs", self.gradcheck_pairs.to_string()),
        ];
        out.extend(rest.into_iter().map(|(k, v)| (k.to_string(), v)));
        out.extend(model_pairs("gradcheck.model.", &self.gradcheck_model, true));
        out
    }

    pub fn to_text(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Applies the settings in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError {
                key: None,
                line: Some(n + 1),
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| ConfigError {
                line: Some(n + 1),
                ..e
            })?;
        }
        Ok(())
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError {
            key: None,
            line: None,
            msg: format!("override `{assignment}` is not `key=value`"),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text =
                fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            cfg.apply_text(&text)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section; the message names the offending setting.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |section: &str, e: String| key_err(section, e);
        self.train
            .validate()
            .map_err(|e| wrap("train.*", e.to_string()))?;
        self.decode
            .validate()
            .map_err(|e| wrap("decode.*", e.to_string()))?;
        self.split
            .validate()
            .map_err(|e| wrap("data.*", e.to_string()))?;
        self.lda
            .validate()
            .map_err(|e| wrap("lda.*", e.to_string()))?;
        if self.min_count == 0 {
            return Err(key_err("data.min_count", "must be at least 1"));
        }
        let mut probe = self.model.clone();
        probe.vocab_size = 100;
        probe
            .validate()
            .map_err(|e| wrap("model.*", e.to_string()))?;
        self.gradcheck_model
            .validate()
            .map_err(|e| wrap("gradcheck.model.*", e.to_string()))?;
        if self.gradcheck_pairs == 0 {
            return Err(key_err("gradcheck.pairs", "must be at least 1"));
        }
        Ok(())
    }
}
