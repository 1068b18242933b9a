use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::normalize::{normalize, Gazetteer};
use super::tokenize::tokenize;
use super::vocab::{Vocabulary, BOS, EOS};
use super::CorpusError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    True,
    False,
}

/// One (original tweet, fact-checking reply) record at the text level.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPair {
    pub original_text: String,
    pub reply_text: String,
    pub share_count: Option<u64>,
    pub label: Option<Label>,
}

impl RawPair {
    pub fn new(original: impl Into<String>, reply: impl Into<String>) -> Result<Self, CorpusError> {
        let original_text = original.into();
        let reply_text = reply.into();
        if original_text.trim().is_empty() {
            return Err(CorpusError::EmptySource);
        }
        if reply_text.trim().is_empty() {
            return Err(CorpusError::EmptyReply);
        }
        Ok(Self {
            original_text,
            reply_text,
            share_count: None,
            label: None,
        })
    }

    pub fn with_shares(mut self, shares: u64) -> Self {
        self.share_count = Some(shares);
        self
    }
}

fn parse_label(s: &str) -> Option<Label> {
    match s.to_ascii_lowercase().as_str() {
        "true" => Some(Label::True),
        "false" => Some(Label::False),
        _ => None,
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<RawPair, CorpusError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(2..=4).contains(&fields.len()) {
        return Err(CorpusError::parse(
            lineno,
            format!(
                "expected 2 to 4 tab-separated fields, found {}",
                fields.len()
            ),
        ));
    }
    let mut pair = RawPair::new(fields[0], fields[1])
        .map_err(|e| CorpusError::parse(lineno, e.to_string()))?;
    for field in &fields[2..] {
        let f = field.trim();
        if f.is_empty() {
            continue;
        }
        if let Ok(n) = f.parse::<u64>() {
            if pair.share_count.is_some() || pair.label.is_some() {
                return Err(CorpusError::parse(
                    lineno,
                    "share count must precede the label",
                ));
            }
            pair.share_count = Some(n);
        } else if let Some(l) = parse_label(f) {
            pair.label = Some(l);
        } else {
            return Err(CorpusError::parse(
                lineno,
                format!("`{f}` is neither a share count nor a true/false label"),
            ));
        }
    }
    Ok(pair)
}

/// Parse `original <TAB> reply [<TAB> share_count] [<TAB> label]` lines.
/// Blank lines are skipped.
pub fn parse_dataset(text: &str) -> Result<Vec<RawPair>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<RawPair>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_dataset(&text).map_err(|e| e.in_file(path))
}

pub fn format_dataset(pairs: &[RawPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        out.push_str(&clean(&p.original_text));
        out.push('\t');
        out.push_str(&clean(&p.reply_text));
        if let Some(s) = p.share_count {
            write!(out, "\t{s}").expect("write to string");
        }
        if let Some(l) = p.label {
            out.push_str(match l {
                Label::True => "\ttrue",
                Label::False => "\tfalse",
            });
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, pairs: &[RawPair]) -> Result<(), CorpusError> {
    fs::write(path, format_dataset(pairs)).map_err(|e| CorpusError::io(path, e))
}

/// Normalize then tokenize.
pub fn prepare(text: &str, gazetteer: &Gazetteer) -> Vec<String> {
    tokenize(&normalize(text, gazetteer))
}

/// Maximum source length `N` and reply length `M` (content tokens, before
/// the `<s>`/`</s>` wrapping).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeqLimits {
    pub max_source_len: usize,
    pub max_target_len: usize,
}

impl Default for SeqLimits {
    fn default() -> Self {
        Self {
            max_source_len: 89,
            max_target_len: 64,
        }
    }
}

/// Id-encoded training example. `target_ids` is `<s> y_1 .. y_T </s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub source_ids: Vec<usize>,
    pub target_ids: Vec<usize>,
}

impl EncodedPair {
    /// Content tokens of the reply, without the control tokens.
    pub fn reply_ids(&self) -> &[usize] {
        &self.target_ids[1..self.target_ids.len() - 1]
    }
}

/// Normalize, tokenize and map both sides to ids, truncating to `limits`.
pub fn encode_pair(
    raw: &RawPair,
    vocab: &Vocabulary,
    gazetteer: &Gazetteer,
    limits: SeqLimits,
) -> Result<EncodedPair, CorpusError> {
    let source = prepare(&raw.original_text, gazetteer);
    let reply = prepare(&raw.reply_text, gazetteer);
    if reply.is_empty() {
        return Err(CorpusError::EmptyReply);
    }
    if source.is_empty() {
        return Err(CorpusError::EmptySource);
    }
    let mut source_ids = vocab.encode(&source);
    source_ids.truncate(limits.max_source_len);
    let mut target_ids = Vec::with_capacity(reply.len().min(limits.max_target_len) + 2);
    target_ids.push(BOS);
    target_ids.extend(vocab.encode(&reply).into_iter().take(limits.max_target_len));
    target_ids.push(EOS);
    Ok(EncodedPair {
        source_ids,
        target_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::UNK;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["fake", "news", "url", "a"])
    }

    #[test]
    fn reply_is_wrapped() {
        let raw = RawPair::new("a a", "Fake news https://t.co/x").unwrap();
        let v = vocab();
        let e = encode_pair(&raw, &v, &Gazetteer::default(), SeqLimits::default()).unwrap();
        assert_eq!(
            e.target_ids,
            vec![BOS, v.id("fake"), v.id("news"), v.id("url"), EOS]
        );
        assert_eq!(e.reply_ids().len(), 3);
    }

    #[test]
    fn long_source_truncated() {
        let raw = RawPair::new(vec!["a"; 100].join(" "), "fake").unwrap();
        let e = encode_pair(&raw, &vocab(), &Gazetteer::default(), SeqLimits::default()).unwrap();
        assert_eq!(e.source_ids.len(), 89);
        let raw = RawPair::new("a", vec!["fake"; 70].join(" ")).unwrap();
        let e = encode_pair(&raw, &vocab(), &Gazetteer::default(), SeqLimits::default()).unwrap();
        assert_eq!(e.target_ids.len(), 64 + 2);
    }

    #[test]
    fn unknown_token_maps_to_unk() {
        let raw = RawPair::new("zebra", "fake").unwrap();
        let e = encode_pair(&raw, &vocab(), &Gazetteer::default(), SeqLimits::default()).unwrap();
        assert_eq!(e.source_ids, vec![UNK]);
    }

    #[test]
    fn reply_without_tokens_is_rejected() {
        let raw = RawPair::new("a", "🙄 #").unwrap();
        assert!(matches!(
            encode_pair(&raw, &vocab(), &Gazetteer::default(), SeqLimits::default()),
            Err(CorpusError::EmptyReply)
        ));
        assert!(RawPair::new("a", "   ").is_err());
    }

    #[test]
    fn dataset_lines_parse() {
        let text = "orig one\treply one\n\norig two\treply two\t17\tfalse\norig\treply\ttrue\n";
        let pairs = parse_dataset(text).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[1].share_count, Some(17));
        assert_eq!(pairs[1].label, Some(Label::False));
        assert_eq!(pairs[2].label, Some(Label::True));
        assert_eq!(parse_dataset(&format_dataset(&pairs)).unwrap(), pairs);
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let err = parse_dataset("a\tb\nonly one field\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        let err = parse_dataset("a\tb\tmaybe\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = parse_dataset("a\t  \n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
