use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::CorpusError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Bidirectional token/id map. Ids `0..4` are the reserved control tokens;
/// the rest are ordered by descending corpus frequency, ties lexicographic.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Keep tokens seen at least `min_count` times. Reserved strings appearing
/// in text are never counted.
pub fn build_vocabulary<'a, I>(corpus: I, min_count: u64) -> Result<Vocabulary, CorpusError>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if min_count == 0 {
        return Err(CorpusError::BadMinCount);
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for seq in corpus {
        for tok in seq {
            total += 1;
            if !is_reserved(tok) {
                *freq.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    if total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut kept: Vec<(&str, u64)> = freq.iter().map(|(&t, &c)| (t, c)).collect();
    let unk_count: u64 = kept
        .iter()
        .filter(|(_, c)| *c < min_count)
        .map(|(_, c)| c)
        .sum();
    kept.retain(|(_, c)| *c >= min_count);
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    let mut counts = vec![0, 0, 0, unk_count];
    for (t, c) in kept {
        id_to_token.push(t.to_string());
        counts.push(c);
    }
    Ok(Vocabulary::from_parts(id_to_token, counts))
}

impl Vocabulary {
    fn from_parts(id_to_token: Vec<String>, counts: Vec<u64>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            counts,
        }
    }

    /// Vocabulary over exactly `tokens` after the reserved ids, for tests and
    /// synthetic corpora.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for t in tokens {
            let t = t.into();
            if !id_to_token.contains(&t) {
                id_to_token.push(t);
            }
        }
        let counts = vec![0; id_to_token.len()];
        Self::from_parts(id_to_token, counts)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of `token`; out-of-vocabulary and reserved strings map to `<unk>`.
    pub fn id(&self, token: &str) -> usize {
        if is_reserved(token) {
            return UNK;
        }
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    /// Id of a vocabulary entry, including reserved tokens.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// `token <TAB> id <TAB> count` per line, reserved tokens first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.id_to_token.iter().enumerate() {
            writeln!(out, "{t}\t{i}\t{}", self.counts[i]).expect("write to string");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut id_to_token = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CorpusError::parse(
                    lineno,
                    "expected `token<TAB>id<TAB>count`",
                ));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|_| CorpusError::parse(lineno, "id is not an integer"))?;
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| CorpusError::parse(lineno, "count is not an integer"))?;
            if id != id_to_token.len() {
                return Err(CorpusError::parse(
                    lineno,
                    format!("expected id {}", id_to_token.len()),
                ));
            }
            if id < RESERVED.len() && fields[0] != RESERVED[id] {
                return Err(CorpusError::parse(
                    lineno,
                    format!("id {id} is reserved for {}", RESERVED[id]),
                ));
            }
            if id >= RESERVED.len()
                && (is_reserved(fields[0]) || id_to_token.iter().any(|t| t == fields[0]))
            {
                return Err(CorpusError::parse(
                    lineno,
                    format!("duplicate token `{}`", fields[0]),
                ));
            }
            id_to_token.push(fields[0].to_string());
            counts.push(count);
        }
        if id_to_token.len() < RESERVED.len() {
            return Err(CorpusError::parse(
                0,
                "vocabulary is missing reserved tokens",
            ));
        }
        Ok(Self::from_parts(id_to_token, counts))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_tsv()).map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Self::from_tsv(&text).map_err(|e| e.in_file(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seqs(items: &[&[&str]]) -> Vec<Vec<String>> {
        items
            .iter()
            .map(|s| s.iter().map(|t| t.to_string()).collect())
            .collect()
    }

    fn build(corpus: &[Vec<String>], min: u64) -> Result<Vocabulary, CorpusError> {
        build_vocabulary(corpus.iter().map(Vec::as_slice), min)
    }

    #[test]
    fn rare_tokens_fall_back_to_unk() {
        let c = seqs(&[&["uranium", "fake", "fake"], &["uranium", "fake"]]);
        let v = build(&c, 3).unwrap();
        assert!(!v.contains("uranium"));
        assert_eq!(v.id("uranium"), UNK);
        assert!(v.contains("fake"));
        assert_eq!(v.count(UNK), 2);
    }

    #[test]
    fn min_count_one_keeps_all() {
        let c = seqs(&[&["a", "b", "a"]]);
        assert_eq!(build(&c, 1).unwrap().len(), 4 + 2);
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let mut toks = vec!["the"; 5];
        toks.extend(["fake"; 3]);
        toks.extend(["zeta", "alpha"]);
        let c = vec![toks.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        let v = build(&c, 1).unwrap();
        assert!(v.id("the") < v.id("fake"));
        assert_eq!(v.id("the"), 4);
        assert!(v.id("alpha") < v.id("zeta"));
    }

    #[test]
    fn empty_corpus_and_bad_min_count() {
        let c: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(build(&c, 3), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            build(&seqs(&[&["a"]]), 0),
            Err(CorpusError::BadMinCount)
        ));
    }

    #[test]
    fn reserved_strings_never_overwritten() {
        let c = seqs(&[&["<s>", "<s>", "<pad>", "x"]]);
        let v = build(&c, 1).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.token(BOS), Some("<s>"));
        assert_eq!(v.id("<s>"), UNK);
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let c = seqs(&[&["b", "a", "a"]]);
        let v = build(&c, 1).unwrap();
        assert_eq!(Vocabulary::from_tsv(&v.to_tsv()).unwrap(), v);
        let err =
            Vocabulary::from_tsv("<pad>\t0\t0\n<s>\t1\t0\n</s>\t2\t0\n<unk>\t3\t0\nx\t9\t1\n")
                .unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(words in proptest::collection::vec("[a-e]{1,3}", 1..30)) {
            let c = vec![words.clone()];
            let v = build(&c, 1).unwrap();
            let ids = v.encode(&words);
            prop_assert!(ids.iter().all(|&i| i < v.len()));
            prop_assert_eq!(v.decode(&ids), words);
        }
    }
}
