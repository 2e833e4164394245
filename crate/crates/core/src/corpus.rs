//! Tweet records and JSON-lines corpus I/O.
//!
//! Fields this crate does not know about are kept in [`TweetRecord::extra`]
//! and written back unchanged, so annotation passes can be chained over
//! files produced by other tools.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Denier,
    Believer,
}

impl Stance {
    pub const ALL: [Stance; 2] = [Stance::Denier, Stance::Believer];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Denier => "denier",
            Stance::Believer => "believer",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            other => Err(format!("unknown sentiment label {other:?}")),
        }
    }
}

/// One corpus row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance_label: Option<Stance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment_label: Option<Sentiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sarcasm_label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance_score: Option<f64>,
    /// Per-scorer labels behind `sentiment_label`, in scorer order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment_votes: Option<[Sentiment; 3]>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TweetRecord {
    /// Builds an unlabeled record, taking hashtags from the text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let hashtags = extract_hashtags(&text);
        Self {
            id: id.into(),
            text,
            hashtags,
            stance_label: None,
            sentiment_label: None,
            sarcasm_label: None,
            stance_score: None,
            sentiment_votes: None,
            extra: Map::new(),
        }
    }

    fn normalize(&mut self) {
        for tag in &mut self.hashtags {
            *tag = tag.trim_start_matches('#').to_lowercase();
        }
    }
}

/// `#tag` occurrences in a text, lowercased, without the `#`, in order of
/// first appearance.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in text.split('#').skip(1) {
        let tag: String = piece.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        if tag.is_empty() {
            continue;
        }
        let tag = tag.to_lowercase();
        if !out.contains(&tag) {
            out.push(tag);
        }
    }
    out
}

pub fn parse_jsonl(reader: impl BufRead) -> Result<Vec<TweetRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: "<reader>".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: TweetRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        rec.normalize();
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId(rec.id));
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TweetRecord>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_jsonl(BufReader::new(file))
}

pub fn to_jsonl(records: &[TweetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, records: &[TweetRecord]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(to_jsonl(records).as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_survive_round_trip() {
        let line = r#"{"id":"7","text":"hi #Climate","hashtags":["climate"],"user":{"name":"x"},"retweets":3,"stance_label":"denier"}"#;
        let recs = parse_jsonl(line.as_bytes()).unwrap();
        assert_eq!(recs[0].stance_label, Some(Stance::Denier));
        assert_eq!(recs[0].extra["retweets"], 3);
        let back = to_jsonl(&recs);
        let original: Value = serde_json::from_str(line).unwrap();
        let reparsed: Value = serde_json::from_str(back.trim()).unwrap();
        assert_eq!(original, reparsed);
    }

    #[test]
    fn hashtags_are_lowercased_and_ids_unique() {
        let text = "{\"id\":\"a\",\"text\":\"\",\"hashtags\":[\"#ClimateHoax\"]}\n{\"id\":\"a\",\"text\":\"\"}\n";
        assert!(matches!(parse_jsonl(text.as_bytes()), Err(CorpusError::DuplicateId(id)) if id == "a"));
        let recs = parse_jsonl(text.lines().next().unwrap().as_bytes()).unwrap();
        assert_eq!(recs[0].hashtags, vec!["climatehoax"]);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let text = "{\"id\":\"a\",\"text\":\"\"}\n{not json}\n";
        assert!(matches!(parse_jsonl(text.as_bytes()), Err(CorpusError::Json { line: 2, .. })));
    }

    #[test]
    fn hashtag_extraction() {
        assert_eq!(
            extract_hashtags("Wow #ClimateHoax and #climatehoax, #Qanon! #"),
            vec!["climatehoax".to_string(), "qanon".to_string()]
        );
    }
}
