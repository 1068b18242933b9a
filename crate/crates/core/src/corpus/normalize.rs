//! Text normalization for tweets.
//!
//! Rules, in order:
//! 1. URLs become `url` and `@mentions` become `@user`.
//! 2. Runs of capitalized words listed in the gazetteer become `<person>`.
//! 3. Numbers (digit runs with internal `.`/`,` and an optional `%`) become `<number>`.
//! 4. Everything is lowercased.
//! 5. Characters outside the allow-list are removed.
//! 6. Rule 1 is applied once more, since removals can expose new URLs or mentions.
//!
//! The allow-list is letters, `<`, `>`, space and `. , ! ? ' : ; - @ / %`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

pub const URL_TOKEN: &str = "url";
pub const USER_TOKEN: &str = "@user";
pub const NUMBER_TOKEN: &str = "<number>";
pub const PERSON_TOKEN: &str = "<person>";

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("valid regex"));
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").expect("valid regex"));
static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+(?:[.,]\d+)*%?").expect("valid regex"));

const PUNCT: &str = ".,!?':;-@/%<>";

/// Person names matched case-sensitively; multi-word names are allowed.
#[derive(Clone, Debug, Default)]
pub struct Gazetteer {
    names: HashSet<Vec<String>>,
    longest: usize,
}

impl Gazetteer {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut g = Gazetteer::default();
        for name in names {
            let words: Vec<String> = name
                .as_ref()
                .split_whitespace()
                .map(str::to_string)
                .collect();
            if words.is_empty() {
                continue;
            }
            g.longest = g.longest.max(words.len());
            g.names.insert(words);
        }
        g
    }

    /// One name per line; blank lines are ignored.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::new(text.lines()))
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }
}

fn replace_urls_and_mentions(text: &str) -> String {
    let t = URL_RE.replace_all(text, URL_TOKEN);
    MENTION_RE.replace_all(&t, USER_TOKEN).into_owned()
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Split a whitespace word into leading symbols, alphanumeric core and trailing symbols.
fn strip_punct(word: &str) -> (&str, &str, &str) {
    let core_start = word
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map_or(word.len(), |(i, _)| i);
    let core_end = word[core_start..]
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map_or(core_start, |(i, c)| core_start + i + c.len_utf8());
    (
        &word[..core_start],
        &word[core_start..core_end],
        &word[core_end..],
    )
}

fn replace_persons(words: Vec<&str>, gazetteer: &Gazetteer) -> Vec<String> {
    if gazetteer.is_empty() {
        return words.into_iter().map(str::to_string).collect();
    }
    let mut out = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let mut matched = 0;
        for len in (1..=gazetteer.longest.min(words.len() - i)).rev() {
            let span = &words[i..i + len];
            let cores: Vec<String> = span
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let (lead, core, trail) = strip_punct(w);
                    // Punctuation may only surround the whole span.
                    if (k > 0 && !lead.is_empty()) || (k + 1 < len && !trail.is_empty()) {
                        String::new()
                    } else {
                        core.to_string()
                    }
                })
                .collect();
            if cores.iter().all(|c| is_capitalized(c)) && gazetteer.names.contains(&cores) {
                matched = len;
                break;
            }
        }
        if matched == 0 {
            out.push(words[i].to_string());
            i += 1;
        } else {
            let (lead, _, _) = strip_punct(words[i]);
            let (_, _, trail) = strip_punct(words[i + matched - 1]);
            out.push(format!("{lead}{PERSON_TOKEN}{trail}"));
            i += matched;
        }
    }
    out
}

fn allowed(c: char) -> bool {
    c.is_alphabetic() || c == ' ' || PUNCT.contains(c)
}

/// Apply the normalization rules. Total and idempotent.
pub fn normalize(text: &str, gazetteer: &Gazetteer) -> String {
    let text = replace_urls_and_mentions(text);
    let words = replace_persons(text.split_whitespace().collect(), gazetteer);
    let joined = words.join(" ");
    let numbers = NUMBER_RE.replace_all(&joined, NUMBER_TOKEN);
    let lowered = numbers.to_lowercase();
    let filtered: String = lowered
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|&c| allowed(c))
        .collect();
    let again = replace_urls_and_mentions(&filtered);
    again.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn empty() -> Gazetteer {
        Gazetteer::default()
    }

    #[test]
    fn urls_and_mentions() {
        assert_eq!(
            normalize("@realDonald see https://t.co/abc", &empty()),
            "@user see url"
        );
        assert_eq!(
            normalize("visit www.snopes.com/x now", &empty()),
            "visit url now"
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            normalize("She sold 20 % of it", &empty()),
            "she sold <number> % of it"
        );
        assert_eq!(
            normalize("1,000 and 3.5% in 2016.", &empty()),
            "<number> and <number> in <number>."
        );
    }

    #[test]
    fn gazetteer_names() {
        let g = Gazetteer::new(["Pershing", "Hillary Clinton"]);
        assert_eq!(normalize("Pershing said so", &g), "<person> said so");
        assert_eq!(normalize("pershing said so", &g), "pershing said so");
        assert_eq!(
            normalize("Ask Hillary Clinton, she knows", &g),
            "ask <person>, she knows"
        );
        assert_eq!(normalize("(Pershing) lied", &g), "<person> lied");
    }

    #[test]
    fn special_characters_removed() {
        assert_eq!(
            normalize("#FakeNews!!! 🙄 &amp; more", &empty()),
            "fakenews!!! amp; more"
        );
        assert_eq!(normalize("", &empty()), "");
        assert_eq!(normalize("🙄🙄", &empty()), "");
    }

    #[test]
    fn removal_exposing_a_url_is_still_replaced() {
        let once = normalize("http#://x.com", &empty());
        assert_eq!(once, "url");
        assert_eq!(normalize(&once, &empty()), once);
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,60}") {
            let g = Gazetteer::new(["Pershing", "Ann Lee"]);
            let once = normalize(&s, &g);
            prop_assert_eq!(normalize(&once, &g), once.clone());
        }

        #[test]
        fn idempotent_on_tweetlike(s in "[A-Za-z0-9@#:/.,%!? '\\-]{0,80}") {
            let g = Gazetteer::new(["Pershing"]);
            let once = normalize(&s, &g);
            prop_assert_eq!(normalize(&once, &g), once.clone());
        }
    }
}
