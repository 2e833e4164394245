//! Seeded synthetic climate tweets with class-correlated vocabulary, for
//! smoke tests and the bundled mini-corpus.
//!
//! Each tweet draws a stance, then a sentiment conditioned on it, then
//! stance cue words (each swapped for the other class with probability
//! `cue_noise`), one sentiment word for non-neutral tweets, filler, and
//! hashtags from the class pools.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentiment, Stance, TweetRecord};

pub const DENIER_CUES: &[&str] = &[
    "alarmist", "taxes", "elites", "globalist", "cooling", "hiatus", "cycle", "sunspots", "models", "windmills",
    "volcanoes", "climategate", "satellites", "snow", "bureaucrats", "socialism",
];
pub const BELIEVER_CUES: &[&str] = &[
    "science", "emissions", "solar", "carbon", "scientists", "wind", "melting", "sealevel", "glaciers", "drought",
    "wildfires", "transition", "research", "evidence", "planet", "generations",
];
pub const POSITIVE_WORDS: &[&str] =
    &["great", "love", "wonderful", "happy", "proud", "amazing", "good", "excellent", "beautiful", "glad"];
pub const NEGATIVE_WORDS: &[&str] =
    &["terrible", "awful", "hate", "angry", "sad", "worst", "disgusting", "bad", "horrible", "pathetic", "ugly", "wrong"];
pub const FILLER: &[&str] = &[
    "today", "people", "world", "news", "week", "year", "city", "report", "think", "read", "talk", "government",
    "pipelines", "policy", "weather", "summer", "winter", "country", "media", "debate",
];
const DENIER_TAGS: &[&str] = &["climatehoax", "globalwarminghoax", "climatechangehoax", "nocarbontax", "climatecult"];
const BELIEVER_TAGS: &[&str] = &["climatechangeisreal", "actonclimate", "scienceisreal", "greennewdeal", "renewables"];
const NEUTRAL_TAGS: &[&str] = &["climate", "weather", "environment"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub tweets: usize,
    pub denier_fraction: f64,
    /// Probability that a stance cue comes from the other class.
    pub cue_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { tweets: 200, denier_fraction: 0.3, cue_noise: 0.2, seed: 2020 }
    }
}

/// P(negative, positive, neutral | stance).
fn sentiment_mix(stance: Stance) -> [(Sentiment, f64); 3] {
    match stance {
        Stance::Denier => [(Sentiment::Negative, 0.60), (Sentiment::Positive, 0.18), (Sentiment::Neutral, 0.22)],
        Stance::Believer => [(Sentiment::Negative, 0.25), (Sentiment::Positive, 0.46), (Sentiment::Neutral, 0.29)],
    }
}

fn pick<'a>(rng: &mut impl Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

/// Tweets with gold `stance_label` and `sentiment_label` set.
pub fn generate(cfg: &SyntheticConfig) -> Vec<TweetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_denier = (cfg.tweets as f64 * cfg.denier_fraction).round() as usize;
    let mut stances: Vec<Stance> = (0..cfg.tweets).map(|i| if i < n_denier { Stance::Denier } else { Stance::Believer }).collect();
    stances.shuffle(&mut rng);

    stances
        .into_iter()
        .enumerate()
        .map(|(i, stance)| {
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut sentiment = Sentiment::Neutral;
            for (s, p) in sentiment_mix(stance) {
                acc += p;
                if r < acc {
                    sentiment = s;
                    break;
                }
            }
            let (own, other, own_tags) = match stance {
                Stance::Denier => (DENIER_CUES, BELIEVER_CUES, DENIER_TAGS),
                Stance::Believer => (BELIEVER_CUES, DENIER_CUES, BELIEVER_TAGS),
            };
            let mut words: Vec<&str> = Vec::new();
            for _ in 0..rng.gen_range(1..=2) {
                words.push(pick(&mut rng, FILLER));
            }
            for _ in 0..2 {
                let pool = if rng.gen::<f64>() < cfg.cue_noise { other } else { own };
                words.push(pick(&mut rng, pool));
            }
            match sentiment {
                Sentiment::Positive => words.push(pick(&mut rng, POSITIVE_WORDS)),
                Sentiment::Negative => words.push(pick(&mut rng, NEGATIVE_WORDS)),
                Sentiment::Neutral => {}
            }
            words.push(pick(&mut rng, FILLER));
            let pos = rng.gen_range(0..words.len());
            let last = words.len() - 1;
            words.swap(pos, last);

            let mut tags = vec![pick(&mut rng, own_tags)];
            if rng.gen::<f64>() < 0.5 {
                tags.push(pick(&mut rng, NEUTRAL_TAGS));
            }
            let text = format!(
                "{} {}",
                words.join(" "),
                tags.iter().map(|t| format!("#{t}")).collect::<Vec<_>>().join(" ")
            );
            let mut rec = TweetRecord::new(format!("syn-{i:04}"), text);
            rec.stance_label = Some(stance);
            rec.sentiment_label = Some(sentiment);
            rec
        })
        .collect()
}
