//! Regenerates `data/mini_corpus.jsonl` and its golden sentiment labels
//! `data/mini_corpus.sentiment.jsonl`.
//!
//!     cargo run -p stancemt --example mini_corpus

use std::path::Path;

use stancemt::corpus::{self, TweetRecord};
use stancemt::sentiment::{self, SentimentEnsemble};
use stancemt::synthetic::{generate, SyntheticConfig};
use stancemt::text::TextPipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let raw: Vec<TweetRecord> = generate(&SyntheticConfig::default())
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut text = r.text;
            if i % 7 == 0 {
                text = format!("RT @user{i}: {text}");
            }
            if i % 5 == 0 {
                text.push_str(&format!(" https://t.co/{i:x}q"));
            }
            if i % 11 == 0 {
                text = text.to_uppercase();
            }
            TweetRecord::new(r.id, text)
        })
        .collect();
    corpus::write_jsonl(&data.join("mini_corpus.jsonl"), &raw)?;

    let mut labeled = raw;
    sentiment::annotate(&mut labeled, TextPipeline::bundled(), &SentimentEnsemble::default());
    std::fs::write(data.join("mini_corpus.sentiment.jsonl"), golden_lines(&labeled))?;
    Ok(())
}

/// `{"id", "sentiment_label", "sentiment_votes"}` per record.
pub fn golden_lines(records: &[TweetRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let row = serde_json::json!({
                "id": r.id,
                "sentiment_label": r.sentiment_label,
                "sentiment_votes": r.sentiment_votes,
            });
            format!("{row}\n")
        })
        .collect()
}
