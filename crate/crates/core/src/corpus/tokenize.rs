//! Rule-based tokenizer for normalized text.
//!
//! Splits on whitespace, pulls placeholders (`<number>`, `<person>`,
//! `@user`) out as their own tokens, then detaches leading and trailing
//! punctuation one character at a time. Apostrophes inside a word stay
//! (`it's`).

use super::normalize::{NUMBER_TOKEN, PERSON_TOKEN, USER_TOKEN};

const PLACEHOLDERS: [&str; 3] = [NUMBER_TOKEN, PERSON_TOKEN, USER_TOKEN];

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn split_word(word: &str, out: &mut Vec<String>) {
    let mut lead = Vec::new();
    let mut rest = word;
    while let Some(c) = rest.chars().next() {
        if !is_punct(c) {
            break;
        }
        lead.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }
    let mut trail = Vec::new();
    while let Some(c) = rest.chars().next_back() {
        if !is_punct(c) {
            break;
        }
        trail.push(c.to_string());
        rest = &rest[..rest.len() - c.len_utf8()];
    }
    out.extend(lead);
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.extend(trail.into_iter().rev());
}

fn split_placeholders(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    while !rest.is_empty() {
        let next = PLACEHOLDERS
            .iter()
            .filter_map(|p| rest.find(p).map(|i| (i, *p)))
            .min();
        match next {
            Some((i, p)) => {
                if i > 0 {
                    split_word(&rest[..i], out);
                }
                out.push(p.to_string());
                rest = &rest[i + p.len()..];
            }
            None => {
                split_word(rest, out);
                break;
            }
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_placeholders(chunk, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn detaches_punctuation() {
        assert_eq!(
            toks("wrong. never happened. url"),
            ["wrong", ".", "never", "happened", ".", "url"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(toks("").is_empty());
        assert!(toks("   ").is_empty());
    }

    #[test]
    fn keeps_internal_apostrophe() {
        assert_eq!(toks("it's fake!"), ["it's", "fake", "!"]);
        assert_eq!(toks("'quoted'"), ["'", "quoted", "'"]);
    }

    #[test]
    fn placeholders_are_single_tokens() {
        assert_eq!(
            toks("@user <person> said <number>% url"),
            ["@user", "<person>", "said", "<number>", "%", "url"]
        );
        assert_eq!(toks("covid<number>!"), ["covid", "<number>", "!"]);
        assert_eq!(toks("(<person>)"), ["(", "<person>", ")"]);
    }

    #[test]
    fn retokenizing_joined_tokens_is_stable() {
        let t = toks("it's a lie... @user, see url!");
        assert_eq!(tokenize(&t.join(" ")), t);
    }
}
