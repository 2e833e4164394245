//! Topic-word features for each tweet.
//!
//! A [`TopicModel`] is either fitted in-repo (TF-IDF vectors clustered by
//! spherical k-means) or loaded from a JSON file produced by an external
//! topic-modelling tool. Both share one file format:
//!
//! ```json
//! {"topics": [[["hoax", 0.9], ["myth", 0.8]], ...],
//!  "doc_topic": {"tweet-id": [0.7, 0.3], ...}}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::stance::SeedSet;
use crate::text::TextPipeline;

pub const DEFAULT_K_TOPICS: usize = 20;
/// Softmax temperature over negative centroid distances.
pub const DOC_TOPIC_TEMPERATURE: f64 = 0.1;
const MAX_ITER: usize = 100;
const SUM_TOLERANCE: f64 = 1e-6;
/// Scores closer than this count as tied.
const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("k_topics = {k} exceeds the vocabulary size {vocab}")]
    TooManyTopics { k: usize, vocab: usize },
    #[error("k_topics = {k} exceeds the number of documents {docs}")]
    TooFewDocuments { k: usize, docs: usize },
    #[error("k_topics must be positive")]
    ZeroTopics,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed topic file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("tweet {id}: {msg}")]
    InvalidRow { id: String, msg: String },
    #[error("topic {0} has no words")]
    EmptyTopic(usize),
    #[error("unknown tweet id {0:?}")]
    UnknownTweet(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    /// Ranked `(word, weight)` lists, highest weight first.
    pub topics: Vec<Vec<(String, f64)>>,
    pub doc_topic: BTreeMap<String, Vec<f64>>,
}

/// Topic words attached to one tweet, deduplicated in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicFeature {
    pub words: Vec<String>,
}

/// Tokens fed to topic fitting for one tweet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopicDocument {
    pub id: String,
    pub tokens: Vec<String>,
}

/// Content words of each tweet after removing seed hashtags from the text.
pub fn topic_documents(corpus: &[TweetRecord], pipeline: &TextPipeline, seeds: &SeedSet) -> Vec<TopicDocument> {
    corpus
        .iter()
        .map(|rec| {
            let text = strip_hashtags(&rec.text, |tag| seeds.contains(tag));
            TopicDocument { id: rec.id.clone(), tokens: pipeline.content_words(&text) }
        })
        .collect()
}

fn strip_hashtags(text: &str, drop: impl Fn(&str) -> bool) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('#') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let end = after.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(after.len());
        let tag = &after[..end];
        if tag.is_empty() || !drop(&tag.to_lowercase()) {
            out.push('#');
            out.push_str(tag);
        }
        rest = &after[end..];
    }
    out.push_str(rest);
    out
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn validate(&self) -> Result<(), TopicError> {
        for (i, t) in self.topics.iter().enumerate() {
            if t.is_empty() {
                return Err(TopicError::EmptyTopic(i));
            }
        }
        let k = self.topics.len();
        for (id, row) in &self.doc_topic {
            let bad = |msg: String| TopicError::InvalidRow { id: id.clone(), msg };
            if row.len() != k {
                return Err(bad(format!("{} probabilities for {k} topics", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(bad("probabilities must be finite and nonnegative".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(bad(format!("probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TopicError> {
        let model: TopicModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topic model serializes")
    }
}

pub fn load_external(path: &Path) -> Result<TopicModel, TopicError> {
    let text = std::fs::read_to_string(path).map_err(|source| TopicError::Io { path: path.display().to_string(), source })?;
    TopicModel::from_json(&text)
}

/// Top-`p` words of the `m` most probable topics for a tweet.
pub fn top_words(model: &TopicModel, tweet_id: &str, m: usize, p: usize) -> Result<TopicFeature, TopicError> {
    let row = model.doc_topic.get(tweet_id).ok_or_else(|| TopicError::UnknownTweet(tweet_id.to_string()))?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    // stable sort keeps lower topic indices first on ties
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    for &t in order.iter().take(m) {
        for (w, _) in model.topics[t].iter().take(p) {
            if seen.insert(w.clone()) {
                words.push(w.clone());
            }
        }
    }
    Ok(TopicFeature { words })
}

/// TF-IDF + spherical k-means topic model.
pub fn fit_baseline(docs: &[TopicDocument], k_topics: usize, seed: u64) -> Result<TopicModel, TopicError> {
    if k_topics == 0 {
        return Err(TopicError::ZeroTopics);
    }
    let vocab: Vec<String> = {
        let mut v: Vec<String> = docs.iter().flat_map(|d| d.tokens.iter().cloned()).collect();
        v.sort();
        v.dedup();
        v
    };
    if k_topics > vocab.len() {
        return Err(TopicError::TooManyTopics { k: k_topics, vocab: vocab.len() });
    }
    if k_topics > docs.len() {
        return Err(TopicError::TooFewDocuments { k: k_topics, docs: docs.len() });
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let vectors = tfidf(docs, &index, vocab.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(&vectors, k_topics, &mut rng);
    let mut assign = vec![usize::MAX; vectors.len()];
    for _ in 0..MAX_ITER {
        let next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        if next == assign {
            break;
        }
        assign = next;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut sum = vec![0.0; vocab.len()];
            let mut members = 0;
            for (v, _) in vectors.iter().zip(&assign).filter(|(_, &a)| a == c) {
                members += 1;
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            }
            // an empty cluster keeps its previous centroid
            if members > 0 && normalize(&mut sum) {
                *centroid = sum;
            }
        }
    }

    let topics = centroids
        .iter()
        .map(|c| {
            let mut ranked: Vec<(String, f64)> =
                c.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, &w)| (vocab[i].clone(), w)).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            if ranked.is_empty() {
                ranked.push((vocab[0].clone(), 0.0));
            }
            ranked
        })
        .collect();

    let doc_topic = docs
        .iter()
        .zip(&vectors)
        .map(|(d, v)| {
            let logits: Vec<f64> = centroids.iter().map(|c| -euclidean(v, c) / DOC_TOPIC_TEMPERATURE).collect();
            (d.id.clone(), softmax(&logits))
        })
        .collect();
    Ok(TopicModel { topics, doc_topic })
}

fn tfidf(docs: &[TopicDocument], index: &HashMap<&str, usize>, dim: usize) -> Vec<Vec<f64>> {
    let n = docs.len() as f64;
    let mut df = vec![0usize; dim];
    let counts: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| {
            let mut tf = vec![0.0; dim];
            for t in &d.tokens {
                tf[index[t.as_str()]] += 1.0;
            }
            tf.iter().enumerate().filter(|(_, &c)| c > 0.0).for_each(|(i, _)| df[i] += 1);
            tf
        })
        .collect();
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    counts
        .into_iter()
        .map(|mut tf| {
            tf.iter_mut().zip(&idf).for_each(|(x, w)| *x *= w);
            normalize(&mut tf);
            tf
        })
        .collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index of the most similar centroid; ties go to the lowest index.
fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> usize {
    let sims: Vec<f64> = centroids.iter().map(|c| dot(v, c)).collect();
    argmax_lowest(&sims)
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] + TIE_EPSILON {
            best = i;
        }
    }
    best
}

/// Most probable topic of a probability row; ties go to the lowest index.
pub fn dominant_topic(row: &[f64]) -> usize {
    argmax_lowest(row)
}

fn kmeans_pp(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.gen_range(0..vectors.len())];
    while chosen.len() < k {
        let dist: Vec<f64> = vectors
            .iter()
            .map(|v| chosen.iter().map(|&c| (1.0 - dot(v, &vectors[c])).max(0.0)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = dist.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if *d > 0.0 && r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            // every point coincides with a centroid; take the first unused one
            (0..vectors.len()).find(|i| !chosen.contains(i)).expect("k <= number of documents")
        };
        chosen.push(next);
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
