//! Attention-equipped GRU encoder-decoder for fact-checking replies.
//!
//! Vectors are rows: an embedding is `1 × D`, a hidden state `1 × H`, and
//! the gates compute `x W + h U` with `W: D × H`, `U: H × H`. The encoder
//! output stacks the states of real (non-pad) tokens as an `n × H` matrix,
//! so padding never reaches attention.

mod graph;
mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::vocab::{Vocabulary, PAD, RESERVED};
use crate::corpus::vocab::{BOS, EOS};
use crate::corpus::EncodedPair;
use crate::tensor::{
    finite_diff_check, Checkpoint, GradCheckConfig, GradCheckReport, ParamStore, Partition, Real,
    Tape, Tensor, TensorError,
};

pub use graph::{gru_cell, GruWeights};
pub use train::{format_history, train, train_until, EarlyStopping, EpochRecord, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("source sequence is empty")]
    EmptySource,
    #[error("source length {len} exceeds the maximum {max}")]
    SourceTooLong { len: usize, max: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("batch has no target tokens")]
    EmptyBatch,
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("word `{0}` is not in the vocabulary")]
    UnknownWord(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionKind {
    Dot,
    Bilinear,
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionKind::Dot => "dot",
            AttentionKind::Bilinear => "bilinear",
        })
    }
}

impl FromStr for AttentionKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(AttentionKind::Dot),
            "bilinear" => Ok(AttentionKind::Bilinear),
            _ => Err(ModelError::Config(format!("unknown attention kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub attention: AttentionKind,
    pub dropout: f64,
    /// Seeds the parameter initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            embed_dim: 300,
            hidden_size: 300,
            output_size: 256,
            max_source_len: 89,
            max_target_len: 64,
            attention: AttentionKind::Dot,
            dropout: 0.2,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// The small configuration used for gradient checks.
    pub fn tiny(attention: AttentionKind) -> Self {
        Self {
            vocab_size: 20,
            embed_dim: 8,
            hidden_size: 8,
            output_size: 8,
            max_source_len: 6,
            max_target_len: 5,
            attention,
            dropout: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_size", self.hidden_size),
            ("output_size", self.output_size),
            ("max_source_len", self.max_source_len),
            ("max_target_len", self.max_target_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be positive")));
        }
        if self.vocab_size <= RESERVED.len() {
            return Err(ModelError::Config(format!(
                "vocab_size must exceed the {} reserved tokens",
                RESERVED.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("vocab_size", self.vocab_size.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_size", self.hidden_size.to_string()),
            ("output_size", self.output_size.to_string()),
            ("max_source_len", self.max_source_len.to_string()),
            ("max_target_len", self.max_target_len.to_string()),
            ("attention", self.attention.to_string()),
            ("dropout", self.dropout.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| ModelError::Checkpoint(format!("missing config key `{key}`")))
        };
        fn num<N: FromStr>(key: &str, v: &str) -> Result<N> {
            v.parse()
                .map_err(|_| ModelError::Checkpoint(format!("bad value `{v}` for `{key}`")))
        }
        let cfg = Self {
            vocab_size: num("vocab_size", get("vocab_size")?)?,
            embed_dim: num("embed_dim", get("embed_dim")?)?,
            hidden_size: num("hidden_size", get("hidden_size")?)?,
            output_size: num("output_size", get("output_size")?)?,
            max_source_len: num("max_source_len", get("max_source_len")?)?,
            max_target_len: num("max_target_len", get("max_target_len")?)?,
            attention: get("attention")?.parse()?,
            dropout: num("dropout", get("dropout")?)?,
            seed: num("seed", get("seed")?)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub mod names {
    pub const EMBEDDING: &str = "embedding";
    pub const ENCODER: &str = "encoder";
    pub const DECODER: &str = "decoder";
    pub const W_A: &str = "attention.w_a";
    pub const W_C: &str = "output.w_c";
    pub const W_S: &str = "output.w_s";
    pub const GATES: [&str; 6] = ["w_z", "w_r", "w_o", "u_z", "u_r", "u_o"];
}

/// Encoder result for one source.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput<T: Real = f32> {
    /// `n × H`, one row per real source token.
    pub states: Tensor<T>,
    /// `1 × H`, the state after the last real token.
    pub last: Tensor<T>,
    pub source_length: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeStepOutput<T: Real = f32> {
    /// `1 × V` distribution over the next token.
    pub probs: Tensor<T>,
    /// `1 × V` log of `probs`, computed stably.
    pub log_probs: Tensor<T>,
    pub hidden: Tensor<T>,
    /// `1 × n` weights over the real source positions.
    pub attention: Tensor<T>,
    pub context: Tensor<T>,
}

/// Loss over a set of pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NllSummary {
    pub total: f64,
    pub tokens: usize,
}

impl NllSummary {
    pub fn per_token(&self) -> f64 {
        self.total / self.tokens as f64
    }

    pub fn perplexity(&self) -> f64 {
        self.per_token().exp()
    }
}

/// The encoder-decoder with its parameters.
#[derive(Clone, Debug)]
pub struct Fcrg<T: Real = f32> {
    config: ModelConfig,
    params: ParamStore<T>,
}

fn uniform_init<T: Real>(rng: &mut ChaCha8Rng, shape: [usize; 2], bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::lit(rng.random_range(-bound..=bound)))
}

impl<T: Real> Fcrg<T> {
    /// Fresh model: `W_e ~ N(0, 1)`, every other weight uniform in
    /// `[-1/sqrt(H), 1/sqrt(H)]`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (v, d, h, o) = (
            config.vocab_size,
            config.embed_dim,
            config.hidden_size,
            config.output_size,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / (h as f64).sqrt();
        let mut params = ParamStore::new();
        let emb = Tensor::from_fn([d, v], |_| T::lit(rng.sample::<f64, _>(StandardNormal)));
        params.insert(names::EMBEDDING, Partition::Shared, emb)?;
        for (side, part) in [
            (names::ENCODER, Partition::Encoder),
            (names::DECODER, Partition::Decoder),
        ] {
            for g in names::GATES {
                let rows = if g.starts_with('w') { d } else { h };
                params.insert(
                    &format!("{side}.{g}"),
                    part,
                    uniform_init(&mut rng, [rows, h], bound),
                )?;
            }
        }
        if config.attention == AttentionKind::Bilinear {
            params.insert(
                names::W_A,
                Partition::Decoder,
                uniform_init(&mut rng, [h, h], bound),
            )?;
        }
        params.insert(
            names::W_C,
            Partition::Decoder,
            uniform_init(&mut rng, [o, 2 * h], bound),
        )?;
        params.insert(
            names::W_S,
            Partition::Decoder,
            uniform_init(&mut rng, [v, o], bound),
        )?;
        Ok(Self { config, params })
    }

    /// Wrap existing parameters, checking that every expected name is present
    /// with the right shape.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        let reference = Fcrg::<T>::new(config.clone())?;
        if reference.params.len() != params.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameters, found {}",
                reference.params.len(),
                params.len()
            )));
        }
        for p in reference.params.iter() {
            let got = params.value(&p.name)?;
            if got.shape() != p.value.shape() {
                return Err(ModelError::Config(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name,
                    got.shape(),
                    p.value.shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Fcrg<U> {
        Fcrg {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.config.vocab_size) {
            Some(&id) => Err(ModelError::TokenOutOfRange {
                id,
                vocab: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// `n × D` embeddings, one row per id (column lookups in `W_e`).
    pub fn embed(&self, ids: &[usize]) -> Result<Tensor<T>> {
        self.check_ids(ids)?;
        Ok(crate::tensor::ops::embedding_lookup(
            self.params.value(names::EMBEDDING)?,
            ids,
        )?)
    }

    /// Trailing `<pad>` ids are ignored.
    pub fn encode(&self, source_ids: &[usize]) -> Result<EncoderOutput<T>> {
        let ids = graph::strip_padding(source_ids);
        self.check_source(ids)?;
        let mut tape = Tape::new(&self.params);
        let vars = graph::ModelVars::bind(&mut tape, self.config.attention)?;
        let enc = graph::encode(&mut tape, &vars, ids, 0.0, None)?;
        Ok(EncoderOutput {
            states: tape.tensor(enc.stack),
            last: tape.tensor(enc.last),
            source_length: ids.len(),
        })
    }

    fn check_source(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(ModelError::EmptySource);
        }
        if ids.len() > self.config.max_source_len {
            return Err(ModelError::SourceTooLong {
                len: ids.len(),
                max: self.config.max_source_len,
            });
        }
        self.check_ids(ids)
    }

    /// Attention weights of hidden state `h` (`1 × H`) over encoder states.
    pub fn attention(&self, states: &Tensor<T>, h: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new(&self.params);
        let vars = graph::ModelVars::bind(&mut tape, self.config.attention)?;
        let s = tape.constant(states);
        let h = tape.constant(h);
        let a = graph::attend(&mut tape, &vars, s, h)?;
        Ok(tape.tensor(a))
    }

    /// One decoder step from the previous token and state.
    pub fn decode_step(
        &self,
        prev_id: usize,
        h_prev: &Tensor<T>,
        encoded: &EncoderOutput<T>,
    ) -> Result<DecodeStepOutput<T>> {
        self.check_ids(&[prev_id])?;
        let mut tape = Tape::new(&self.params);
        let vars = graph::ModelVars::bind(&mut tape, self.config.attention)?;
        let s = tape.constant(&encoded.states);
        let h = tape.constant(h_prev);
        let step = graph::decode_step(&mut tape, &vars, prev_id, h, s, 0.0, None)?;
        let log_probs = tape.tensor(step.log_probs);
        Ok(DecodeStepOutput {
            probs: log_probs.map(|x| x.exp()),
            log_probs,
            hidden: tape.tensor(step.hidden),
            attention: tape.tensor(step.attention),
            context: tape.tensor(step.context),
        })
    }

    /// Teacher-forced negative log-likelihood, summed over pairs. Dropout is
    /// off.
    pub fn sequence_nll(&self, pairs: &[EncodedPair]) -> Result<NllSummary> {
        let mut total = 0.0;
        let mut tokens = 0;
        for pair in pairs {
            let mut tape = Tape::new(&self.params);
            let (loss, n) = self.pair_loss(&mut tape, pair, None)?;
            total += tape.scalar(loss).as_f64();
            tokens += n;
        }
        if tokens == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok(NllSummary { total, tokens })
    }

    fn pair_loss<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        pair: &EncodedPair,
        rng: Option<&mut (dyn RngCore + 'static)>,
    ) -> Result<(crate::tensor::Var, usize)> {
        let src = graph::strip_padding(&pair.source_ids);
        self.check_source(src)?;
        let tgt = graph::strip_padding(&pair.target_ids);
        if tgt.len() < 2 {
            return Err(ModelError::EmptyBatch);
        }
        self.check_ids(tgt)?;
        let vars = graph::ModelVars::bind(tape, self.config.attention)?;
        let loss = graph::sequence_loss(tape, &vars, src, tgt, self.config.dropout, rng)?;
        Ok((loss, tgt.len() - 1))
    }

    /// Adds the gradients of the summed loss over `pairs` into the store and
    /// returns the loss. Passing an RNG enables dropout.
    pub fn accumulate_gradients(
        &mut self,
        pairs: &[EncodedPair],
        mut rng: Option<&mut (dyn RngCore + 'static)>,
    ) -> Result<NllSummary> {
        let mut total = 0.0;
        let mut tokens = 0;
        for pair in pairs {
            let grads = {
                let mut tape = Tape::new(&self.params);
                let (loss, n) = self.pair_loss(&mut tape, pair, rng.as_deref_mut())?;
                total += tape.scalar(loss).as_f64();
                tokens += n;
                tape.backward(loss)?
            };
            self.params.accumulate(&grads)?;
        }
        if tokens == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok(NllSummary { total, tokens })
    }

    /// The `k` words whose embedding columns have the highest cosine
    /// similarity to `word`. Reserved tokens and the query are excluded;
    /// ties go to the lower id.
    pub fn nearest_neighbors(
        &self,
        vocab: &Vocabulary,
        word: &str,
        k: usize,
    ) -> Result<Vec<(String, f64)>> {
        let q = vocab
            .lookup(word)
            .filter(|&i| i >= RESERVED.len())
            .ok_or_else(|| ModelError::UnknownWord(word.to_string()))?;
        let emb = self.params.value(names::EMBEDDING)?;
        let (_, v) = emb.dims2();
        let column =
            |i: usize| -> Vec<f64> { emb.column_values(i).iter().map(|x| x.as_f64()).collect() };
        let qv = column(q);
        let mut scored: Vec<(usize, f64)> = (RESERVED.len()..v.min(vocab.len()))
            .filter(|&i| i != q)
            .map(|i| (i, crate::metrics::cosine(&qv, &column(i))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(i, c)| (vocab.token(i).unwrap_or(RESERVED[PAD]).to_string(), c))
            .collect())
    }

    pub fn to_checkpoint(&self, epoch: usize) -> Checkpoint<T> {
        Checkpoint {
            seed: self.config.seed,
            epoch,
            config: self.config.to_pairs(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint<T>) -> Result<Self> {
        let config = ModelConfig::from_pairs(&ckpt.config)?;
        Self::from_params(config, ckpt.params)
    }

    pub fn save(&self, path: &Path, epoch: usize) -> Result<()> {
        self.to_checkpoint(epoch)
            .save(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Loads a checkpoint; returns the model and the epoch it was saved at.
    pub fn load(path: &Path) -> Result<(Self, usize)> {
        let ckpt = Checkpoint::<T>::load(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        let epoch = ckpt.epoch;
        Ok((Self::from_checkpoint(ckpt)?, epoch))
    }
}

impl Fcrg<f64> {
    /// Compares the analytic gradient of the summed NLL over `pairs` with
    /// central finite differences. Dropout is off for both.
    pub fn check_gradients(
        &mut self,
        pairs: &[EncodedPair],
        config: &GradCheckConfig,
    ) -> Result<GradCheckReport> {
        self.params.zero_grad();
        self.accumulate_gradients(pairs, None)?;
        let model_config = self.config.clone();
        let report = finite_diff_check(
            &mut self.params,
            |store| {
                let probe = Fcrg::from_params(model_config.clone(), store.clone())
                    .map_err(|e| TensorError::Invalid(e.to_string()))?;
                probe
                    .sequence_nll(pairs)
                    .map(|s| s.total)
                    .map_err(|e| TensorError::Invalid(e.to_string()))
            },
            config,
        )?;
        self.params.zero_grad();
        Ok(report)
    }
}

/// Random non-reserved id pairs within the configured length limits.
pub fn random_pairs(config: &ModelConfig, count: usize, seed: u64) -> Vec<EncodedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = |len: usize| -> Vec<usize> {
        (0..len)
            .map(|_| rng.random_range(RESERVED.len()..config.vocab_size))
            .collect()
    };
    (0..count)
        .map(|i| {
            let src_len = 1 + (i * 7 + 3) % config.max_source_len;
            let reply_len = 1 + (i * 5 + 1) % config.max_target_len;
            let source_ids = ids(src_len);
            let mut target_ids = vec![BOS];
            target_ids.extend(ids(reply_len));
            target_ids.push(EOS);
            EncodedPair {
                source_ids,
                target_ids,
            }
        })
        .collect()
}
