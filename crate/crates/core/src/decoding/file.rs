//! `source_index <TAB> rank <TAB> log_prob <TAB> tokens` generation files.
//! Indices are 0-based, ranks 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DecodeError, Generated, Result};
use crate::corpus::Vocabulary;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub source_index: usize,
    pub rank: usize,
    pub log_prob: f64,
    pub tokens: Vec<String>,
}

pub fn format_generations(results: &[Vec<Generated>], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (i, responses) in results.iter().enumerate() {
        for (r, g) in responses.iter().enumerate() {
            writeln!(
                out,
                "{i}\t{}\t{:.6}\t{}",
                r + 1,
                g.log_prob,
                vocab.decode(&g.tokens).join(" ")
            )
            .expect("write to string");
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> DecodeError {
    DecodeError::Parse {
        file: None,
        line,
        msg: msg.into(),
    }
}

pub fn parse_generations(text: &str) -> Result<Vec<GenerationRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() < 3 {
            return Err(parse_err(
                lineno,
                "expected `source_index<TAB>rank<TAB>log_prob<TAB>tokens`",
            ));
        }
        let source_index = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad source index `{}`", fields[0])))?;
        let rank: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad rank `{}`", fields[1])))?;
        if rank == 0 {
            return Err(parse_err(lineno, "ranks start at 1"));
        }
        let log_prob = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad log probability `{}`", fields[2])))?;
        let tokens = fields
            .get(3)
            .map(|t| t.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        out.push(GenerationRecord {
            source_index,
            rank,
            log_prob,
            tokens,
        });
    }
    Ok(out)
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationRecord>> {
    let text = fs::read_to_string(path).map_err(|source| DecodeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_generations(&text).map_err(|e| match e {
        DecodeError::Parse { line, msg, .. } => DecodeError::Parse {
            file: Some(path.display().to_string()),
            line,
            msg,
        },
        other => other,
    })
}

pub fn write_generations(
    path: &Path,
    results: &[Vec<Generated>],
    vocab: &Vocabulary,
) -> Result<()> {
    fs::write(path, format_generations(results, vocab)).map_err(|source| DecodeError::Io {
        path: path.display().to_string(),
        source,
    })
}
