//! Tweet cleaning, hashtag segmentation and tokenization.
//!
//! The pipeline is: strip URLs and mentions, segment `#hashtags` into words,
//! drop punctuation and the `RT`/`CC` markers, lowercase, remove stopwords,
//! then Porter-stem. Stopwords and the segmentation wordlist are bundled
//! data files so results do not depend on the host.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const WORDLIST: &str = include_str!("../data/wordlist.txt");

pub const DEFAULT_MAX_TOKENS: usize = 64;

/// Markers removed wherever they appear as a standalone word.
const MARKERS: [&str; 2] = ["rt", "cc"];

/// Tokens for one tweet after the full pipeline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Tokens dropped by tail truncation.
    pub truncated: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Clone, Debug)]
pub struct TextPipeline {
    stopwords: HashSet<String>,
    wordlist: HashSet<String>,
    longest_word: usize,
    max_tokens: usize,
    lemmas: HashMap<String, String>,
}

fn patterns() -> &'static (Regex, Regex, Regex) {
    static P: OnceLock<(Regex, Regex, Regex)> = OnceLock::new();
    P.get_or_init(|| {
        (
            Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap(),
            Regex::new(r"@\w+").unwrap(),
            Regex::new(r"#(\w+)").unwrap(),
        )
    })
}

/// Lowercases and drops apostrophes so that list entries such as `don't`
/// compare equal to tokens produced by [`TextPipeline::clean`].
fn normalize_entry(s: &str) -> String {
    s.trim().chars().filter(|c| !is_apostrophe(*c)).flat_map(char::to_lowercase).collect()
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

impl Default for TextPipeline {
    fn default() -> Self {
        Self::from_lists(STOPWORDS, WORDLIST)
    }
}

impl TextPipeline {
    /// Shared instance built from the bundled lists.
    pub fn bundled() -> &'static TextPipeline {
        static BUNDLED: OnceLock<TextPipeline> = OnceLock::new();
        BUNDLED.get_or_init(TextPipeline::default)
    }

    /// Builds a pipeline from newline-separated stopword and wordlist files.
    pub fn from_lists(stopwords: &str, wordlist: &str) -> Self {
        let stopwords: HashSet<String> = stopwords.lines().map(normalize_entry).filter(|w| !w.is_empty()).collect();
        let wordlist: HashSet<String> = wordlist.lines().map(normalize_entry).filter(|w| !w.is_empty()).collect();
        let longest_word = wordlist.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        Self { stopwords, wordlist, longest_word, max_tokens: DEFAULT_MAX_TOKENS, lemmas: HashMap::new() }
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        assert!(max_tokens > 0, "max_tokens must be positive");
        self.max_tokens = max_tokens;
        self
    }

    /// Installs a surface-form → lemma table applied before stemming.
    pub fn with_lemma_table(mut self, lemmas: HashMap<String, String>) -> Self {
        self.lemmas = lemmas.into_iter().map(|(k, v)| (normalize_entry(&k), normalize_entry(&v))).collect();
        self
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// Removes mentions, URLs, punctuation and RT/CC markers; segments
    /// hashtags; lowercases and collapses whitespace.
    pub fn clean(&self, text: &str) -> String {
        let (url, mention, hashtag) = patterns();
        let text = url.replace_all(text, " ");
        let text = mention.replace_all(&text, " ");
        let text = hashtag.replace_all(&text, |caps: &regex::Captures<'_>| {
            format!(" {} ", self.segment_hashtag(&caps[1]).join(" "))
        });

        let mut flat = String::with_capacity(text.len());
        for c in text.chars() {
            if c.is_alphanumeric() {
                flat.extend(c.to_lowercase());
            } else if !is_apostrophe(c) {
                flat.push(' ');
            }
        }
        flat.split_whitespace().filter(|w| !MARKERS.contains(w)).collect::<Vec<_>>().join(" ")
    }

    /// Splits a hashtag body into words: camel-case and letter/digit
    /// boundaries first, then greedy longest match against the wordlist.
    /// Whatever cannot be matched stays together as one token.
    pub fn segment_hashtag(&self, tag: &str) -> Vec<String> {
        let mut words = Vec::new();
        for piece in camel_pieces(tag) {
            let piece = piece.to_lowercase();
            if self.wordlist.contains(&piece) {
                words.push(piece);
            } else {
                words.extend(self.greedy_split(&piece));
            }
        }
        words
    }

    fn greedy_split(&self, piece: &str) -> Vec<String> {
        let chars: Vec<char> = piece.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (self.longest_word).min(chars.len() - i);
            let hit = (1..=longest).rev().find(|&len| {
                let cand: String = chars[i..i + len].iter().collect();
                self.wordlist.contains(&cand)
            });
            match hit {
                Some(len) => {
                    out.push(chars[i..i + len].iter().collect());
                    i += len;
                }
                None => {
                    out.push(chars[i..].iter().collect());
                    break;
                }
            }
        }
        out
    }

    /// Cleaned words with stopwords kept and no stemming; the input to the
    /// lexicon-based sentiment scorers.
    pub fn words(&self, text: &str) -> Vec<String> {
        self.clean(text).split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect()
    }

    /// Cleaned words without stopwords, not stemmed.
    pub fn content_words(&self, text: &str) -> Vec<String> {
        self.words(text).into_iter().filter(|w| !self.stopwords.contains(w)).collect()
    }

    /// Full pipeline: clean, drop stopwords, apply the lemma table, stem,
    /// and truncate the tail beyond `max_tokens`.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let mut tokens = Vec::new();
        for word in self.content_words(text) {
            let lemma = self.lemmas.get(&word).cloned().unwrap_or(word);
            let stem = stem_fixpoint(&lemma);
            if stem.is_empty() || self.stopwords.contains(&stem) || MARKERS.contains(&stem.as_str()) {
                continue;
            }
            tokens.push(stem);
        }
        let truncated = tokens.len().saturating_sub(self.max_tokens);
        tokens.truncate(self.max_tokens);
        TokenSequence { tokens, truncated }
    }

    /// Stems a single already-cleaned word the same way [`tokenize`](Self::tokenize) does.
    pub fn stem(&self, word: &str) -> String {
        let lemma = self.lemmas.get(word).map(String::as_str).unwrap_or(word);
        stem_fixpoint(lemma)
    }
}

/// Porter stemming repeated until the word stops changing. A single Porter
/// pass is not idempotent (`willingness → willing → will`); the fixpoint is.
fn stem_fixpoint(word: &str) -> String {
    let mut cur = word.to_string();
    loop {
        let next = porter_stemmer::stem(&cur);
        if next == cur || next.is_empty() {
            return cur;
        }
        cur = next;
    }
}

fn camel_pieces(tag: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Kind {
        Upper,
        Lower,
        Digit,
        Other,
    }
    let kind = |c: char| {
        if c.is_uppercase() {
            Kind::Upper
        } else if c.is_alphabetic() {
            Kind::Lower
        } else if c.is_numeric() {
            Kind::Digit
        } else {
            Kind::Other
        }
    };
    let chars: Vec<char> = tag.chars().collect();
    let mut pieces = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let k = kind(c);
        if k == Kind::Other {
            if !cur.is_empty() {
                pieces.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(&prev) = cur.chars().last().as_ref() {
            let pk = kind(prev);
            let next_lower = chars.get(i + 1).map(|&n| kind(n) == Kind::Lower).unwrap_or(false);
            let boundary = (pk == Kind::Lower && k == Kind::Upper)
                || ((pk == Kind::Digit) != (k == Kind::Digit))
                || (pk == Kind::Upper && k == Kind::Upper && next_lower);
            if boundary {
                pieces.push(std::mem::take(&mut cur));
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        pieces.push(cur);
    }
    pieces
}
