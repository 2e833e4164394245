//! Weak-supervision sentiment labels from three rule-based scorers and a
//! majority vote.
//!
//! Scorers read surface words (cleaned, stopwords kept, not stemmed), since
//! stemming destroys lexicon forms and negations such as `not` are
//! stopwords.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::corpus::{Sentiment, TweetRecord};
use crate::text::TextPipeline;

pub const NORMALIZATION_ALPHA: f64 = 15.0;
pub const NEGATION_WINDOW: usize = 3;
pub const POS_THRESHOLD: f64 = 0.05;
pub const NEG_THRESHOLD: f64 = -0.05;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("token {0:?} is both a negation and a booster")]
    Overlap(String),
}

/// Valence lexicon with negation and booster rules.
#[derive(Clone, Debug, Default)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
    negations: HashSet<String>,
    boosters: HashMap<String, f64>,
}

fn parse_weighted(text: &str) -> Result<HashMap<String, f64>, LexiconError> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| LexiconError::Parse { line: i + 1, msg: msg.to_string() };
        let (word, value) = line.split_once('\t').ok_or_else(|| err("expected word<TAB>value"))?;
        let value: f64 = value.trim().parse().map_err(|_| err("value is not a number"))?;
        if !value.is_finite() {
            return Err(err("value is not finite"));
        }
        out.insert(word.trim().to_lowercase(), value);
    }
    Ok(out)
}

fn parse_set(text: &str) -> HashSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect()
}

impl SentimentLexicon {
    pub fn new(
        valence: HashMap<String, f64>,
        negations: HashSet<String>,
        boosters: HashMap<String, f64>,
    ) -> Result<Self, LexiconError> {
        if let Some(tok) = negations.iter().find(|t| boosters.contains_key(*t)) {
            return Err(LexiconError::Overlap(tok.clone()));
        }
        let valence = valence.into_iter().map(|(k, v)| (k, v.clamp(-4.0, 4.0))).collect();
        Ok(Self { valence, negations, boosters })
    }

    pub fn parse(valence: &str, negations: &str, boosters: &str) -> Result<Self, LexiconError> {
        Self::new(parse_weighted(valence)?, parse_set(negations), parse_weighted(boosters)?)
    }

    pub fn bundled() -> &'static SentimentLexicon {
        static LEX: OnceLock<SentimentLexicon> = OnceLock::new();
        LEX.get_or_init(|| {
            Self::parse(
                include_str!("../data/valence_lexicon.txt"),
                include_str!("../data/negations.txt"),
                include_str!("../data/boosters.txt"),
            )
            .expect("bundled lexicon is valid")
        })
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(token)
    }

    pub fn booster(&self, token: &str) -> Option<f64> {
        self.boosters.get(token).copied()
    }

    /// True when the token carries valence or triggers a rule.
    pub fn bears(&self, token: &str) -> bool {
        self.valence.contains_key(token) || self.is_negation(token) || self.boosters.contains_key(token)
    }
}

/// VADER-style compound score: valence sum with negation flips and booster
/// scaling, squashed by `s / sqrt(s² + α)`.
pub fn score_lexicon(tokens: &[impl AsRef<str>], lex: &SentimentLexicon) -> f64 {
    let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let mut sum = 0.0;
    for (i, tok) in toks.iter().enumerate() {
        if lex.is_negation(tok) || lex.booster(tok).is_some() {
            continue;
        }
        let Some(mut v) = lex.valence(tok) else { continue };
        if let Some(m) = i.checked_sub(1).and_then(|j| lex.booster(toks[j])) {
            v *= m;
        }
        let window = &toks[i.saturating_sub(NEGATION_WINDOW)..i];
        if window.iter().any(|t| lex.is_negation(t)) {
            v = -v;
        }
        sum += v;
    }
    sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()
}

/// Word → polarity in [−1, 1], averaged over matched tokens.
#[derive(Clone, Debug, Default)]
pub struct PolarityLexicon {
    polarity: HashMap<String, f64>,
}

impl PolarityLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let polarity = parse_weighted(text)?.into_iter().map(|(k, v)| (k, v.clamp(-1.0, 1.0))).collect();
        Ok(Self { polarity })
    }

    pub fn bundled() -> &'static PolarityLexicon {
        static LEX: OnceLock<PolarityLexicon> = OnceLock::new();
        LEX.get_or_init(|| Self::parse(include_str!("../data/polarity_lexicon.txt")).expect("bundled polarity lexicon"))
    }

    pub fn score(&self, tokens: &[impl AsRef<str>]) -> f64 {
        let hits: Vec<f64> = tokens.iter().filter_map(|t| self.polarity.get(t.as_ref()).copied()).collect();
        if hits.is_empty() {
            0.0
        } else {
            hits.iter().sum::<f64>() / hits.len() as f64
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.polarity.contains_key(token)
    }
}

/// Positive/negative wordlists; score = (pos − neg) / (pos + neg).
#[derive(Clone, Debug, Default)]
pub struct WordCountLexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

impl WordCountLexicon {
    pub fn new(positive: HashSet<String>, negative: HashSet<String>) -> Self {
        Self { positive, negative }
    }

    pub fn parse(positive: &str, negative: &str) -> Self {
        Self::new(parse_set(positive), parse_set(negative))
    }

    pub fn bundled() -> &'static WordCountLexicon {
        static LEX: OnceLock<WordCountLexicon> = OnceLock::new();
        LEX.get_or_init(|| {
            Self::parse(include_str!("../data/positive_words.txt"), include_str!("../data/negative_words.txt"))
        })
    }

    pub fn score(&self, tokens: &[impl AsRef<str>]) -> f64 {
        let pos = tokens.iter().filter(|t| self.positive.contains(t.as_ref())).count() as f64;
        let neg = tokens.iter().filter(|t| self.negative.contains(t.as_ref())).count() as f64;
        if pos + neg == 0.0 {
            0.0
        } else {
            (pos - neg) / (pos + neg)
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.positive.contains(token) || self.negative.contains(token)
    }
}

pub fn to_label(score: f64) -> Sentiment {
    to_label_with(score, POS_THRESHOLD, NEG_THRESHOLD)
}

pub fn to_label_with(score: f64, pos_threshold: f64, neg_threshold: f64) -> Sentiment {
    if score >= pos_threshold {
        Sentiment::Positive
    } else if score <= neg_threshold {
        Sentiment::Negative
    } else {
        Sentiment::Neutral
    }
}

/// Modal label; a three-way tie is neutral.
pub fn majority_vote(labels: [Sentiment; 3]) -> Sentiment {
    let [a, b, c] = labels;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        Sentiment::Neutral
    }
}

/// Per-scorer labels and the final vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SentimentVote {
    pub scorer_labels: [Sentiment; 3],
    pub final_label: Sentiment,
}

/// The three scorers bundled together.
#[derive(Clone, Copy, Debug)]
pub struct SentimentEnsemble<'a> {
    pub valence: &'a SentimentLexicon,
    pub polarity: &'a PolarityLexicon,
    pub counts: &'a WordCountLexicon,
}

impl Default for SentimentEnsemble<'static> {
    fn default() -> Self {
        Self {
            valence: SentimentLexicon::bundled(),
            polarity: PolarityLexicon::bundled(),
            counts: WordCountLexicon::bundled(),
        }
    }
}

impl SentimentEnsemble<'_> {
    pub fn scores(&self, words: &[impl AsRef<str>]) -> [f64; 3] {
        [score_lexicon(words, self.valence), self.polarity.score(words), self.counts.score(words)]
    }

    pub fn vote(&self, words: &[impl AsRef<str>]) -> SentimentVote {
        let scorer_labels = self.scores(words).map(to_label);
        SentimentVote { scorer_labels, final_label: majority_vote(scorer_labels) }
    }

    /// True when any scorer reacts to the token.
    pub fn bears(&self, token: &str) -> bool {
        self.valence.bears(token) || self.polarity.contains(token) || self.counts.contains(token)
    }
}

/// Writes `sentiment_label` and `sentiment_votes` into every record.
pub fn annotate(corpus: &mut [TweetRecord], pipeline: &TextPipeline, ensemble: &SentimentEnsemble<'_>) {
    for rec in corpus.iter_mut() {
        let vote = ensemble.vote(&pipeline.words(&rec.text));
        rec.sentiment_label = Some(vote.final_label);
        rec.sentiment_votes = Some(vote.scorer_labels);
    }
}
