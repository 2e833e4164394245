//! Cross-validated training runs: data preparation, stratified folds,
//! minority oversampling, training, metrics and reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod split;
pub mod train;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{self, Sentiment, Stance, TweetRecord};
use crate::model::{EmbeddingFile, EmbeddingMode, Example, Model, ModelError, Vocabulary};
use crate::text::TextPipeline;
use crate::topics::{self, TopicModel};
pub use config::{ConfigError, ExperimentConfig, Paths};
pub use report::{FoldEntry, FoldReport, TaskSummary};
use split::{oversample_minority, stratified_kfold, validation_split};
use train::{evaluate, fit, FitOptions};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("non-finite value at epoch {epoch}, step {step}: {msg}")]
    NonFinite { epoch: usize, step: usize, msg: String },
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<HarnessError> },
}

impl HarnessError {
    /// Process exit status: 1 configuration, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::NonFinite { .. } => 3,
            HarnessError::Fold { source, .. } => source.exit_code(),
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<corpus::CorpusError> for HarnessError {
    fn from(e: corpus::CorpusError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<topics::TopicError> for HarnessError {
    fn from(e: topics::TopicError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(m) => HarnessError::Config(m),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

/// A tweet reduced to model inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedRecord {
    pub id: String,
    pub text: Vec<String>,
    pub topic: Vec<String>,
    pub stance: Option<Stance>,
    pub sentiment: Option<Sentiment>,
}

/// Stemmed topic words of a tweet, ready for vocabulary lookup.
pub fn topic_tokens(model: &TopicModel, id: &str, m: usize, p: usize, pipeline: &TextPipeline) -> Result<Vec<String>, HarnessError> {
    let feature = topics::top_words(model, id, m, p)?;
    Ok(feature.words.iter().map(|w| pipeline.stem(w)).filter(|w| !w.is_empty()).collect())
}

/// Tokenizes records and attaches topic words. With `require_labels`,
/// records lacking a label for an active task are dropped.
pub fn prepare(
    corpus: &[TweetRecord],
    cfg: &ExperimentConfig,
    topics: Option<&TopicModel>,
    require_labels: bool,
) -> Result<Vec<PreparedRecord>, HarnessError> {
    let pipeline = TextPipeline::bundled().clone().with_max_tokens(cfg.max_tokens);
    if cfg.features.uses_topics() && topics.is_none() {
        return Err(HarnessError::Config("features = text+topic needs a topic model (paths.topics)".into()));
    }
    let mut out = Vec::new();
    let mut skipped = 0;
    for rec in corpus {
        if require_labels
            && ((cfg.variant.has_stance() && rec.stance_label.is_none())
                || (cfg.variant.has_sentiment() && rec.sentiment_label.is_none()))
        {
            skipped += 1;
            continue;
        }
        let topic = match (cfg.features.uses_topics(), topics) {
            (true, Some(model)) => topic_tokens(model, &rec.id, cfg.m, cfg.p, &pipeline)?,
            _ => Vec::new(),
        };
        out.push(PreparedRecord {
            id: rec.id.clone(),
            text: pipeline.tokenize(&rec.text).tokens,
            topic,
            stance: rec.stance_label,
            sentiment: rec.sentiment_label,
        });
    }
    if skipped > 0 {
        log::info!("skipped {skipped} records without labels for the active tasks");
    }
    Ok(out)
}

pub fn build_vocabulary<'a>(records: impl IntoIterator<Item = &'a PreparedRecord>) -> Vocabulary {
    Vocabulary::build(records.into_iter().flat_map(|r| r.text.iter().chain(&r.topic).map(String::as_str)))
}

fn to_example(model: &Model, r: &PreparedRecord) -> Example {
    model.example(&r.text, &r.topic, r.stance, r.sentiment)
}

/// Label used for stratification and oversampling.
fn strata(cfg: &ExperimentConfig, records: &[PreparedRecord]) -> Result<Vec<usize>, HarnessError> {
    records
        .iter()
        .map(|r| {
            let label = if cfg.variant.has_stance() { r.stance.map(Stance::index) } else { r.sentiment.map(Sentiment::index) };
            label.ok_or_else(|| HarnessError::Data(format!("record {} has no label for the active task", r.id)))
        })
        .collect()
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains one fold and scores it on its test indices.
pub fn run_fold(
    cfg: &ExperimentConfig,
    records: &[PreparedRecord],
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    embeddings: Option<&EmbeddingFile>,
) -> Result<(FoldEntry, Model), HarnessError> {
    let labels = strata(cfg, records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed, fold));
    let (train_idx, val_idx) = validation_split(train_idx, cfg.validation_fraction, &mut rng);
    let balanced = if cfg.variant.has_stance() {
        oversample_minority(&train_idx, &labels, &mut rng).map_err(|e| HarnessError::Data(e.to_string()))?
    } else {
        train_idx.clone()
    };
    let vocab = build_vocabulary(train_idx.iter().map(|&i| &records[i]));
    let mut model = Model::new(cfg.model_config(), vocab, rng.gen(), embeddings)?;
    let train: Vec<Example> = balanced.iter().map(|&i| to_example(&model, &records[i])).collect();
    let val: Vec<Example> = val_idx.iter().map(|&i| to_example(&model, &records[i])).collect();
    let test: Vec<Example> = test_idx.iter().map(|&i| to_example(&model, &records[i])).collect();
    let opts = FitOptions { epochs: cfg.epochs, learning_rate: cfg.learning_rate, accumulation: cfg.accumulation };
    let history = fit(&mut model, &train, &val, &opts, &mut rng)?;
    let eval = evaluate(&model, &test)?;
    let entry = FoldEntry {
        fold,
        train_size: train.len(),
        validation_size: val.len(),
        test_size: test.len(),
        best_epoch: history.best_epoch,
        history: history.epochs,
        stance: eval.stance,
        sentiment: eval.sentiment,
    };
    Ok((entry, model))
}

/// k-fold run over an in-memory corpus. Folds train in parallel; results
/// are assembled in fold order.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    corpus: &[TweetRecord],
    topics: Option<&TopicModel>,
    embeddings: Option<&EmbeddingFile>,
) -> Result<(FoldReport, Vec<Model>), HarnessError> {
    cfg.validate()?;
    if cfg.embedding == EmbeddingMode::File && embeddings.is_none() {
        return Err(HarnessError::Config("embedding = \"file\" needs an embedding file".into()));
    }
    let records = prepare(corpus, cfg, topics, true)?;
    let labels = strata(cfg, &records)?;
    let folds = stratified_kfold(&labels, cfg.folds, cfg.seed).map_err(|e| HarnessError::Data(e.to_string()))?;
    let results: Vec<Result<(FoldEntry, Model), HarnessError>> = folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            run_fold(cfg, &records, i, &f.train, &f.test, embeddings)
                .map_err(|e| HarnessError::Fold { fold: i, source: Box::new(e) })
        })
        .collect();
    let mut entries = Vec::new();
    let mut models = Vec::new();
    for r in results {
        let (entry, model) = r?;
        entries.push(entry);
        models.push(model);
    }
    Ok((FoldReport::new(cfg.clone(), entries), models))
}

/// Loads inputs named in `cfg.paths`, runs the experiment, and writes
/// `report.json`, `report.txt` and one checkpoint per fold to the output
/// directory when one is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<FoldReport, HarnessError> {
    cfg.validate()?;
    let corpus_path = cfg.paths.corpus.as_ref().ok_or_else(|| HarnessError::Config("paths.corpus is not set".into()))?;
    let topics = match (&cfg.paths.topics, cfg.features.uses_topics()) {
        (Some(p), true) => Some(topics::load_external(p)?),
        (None, true) => return Err(HarnessError::Config("features = text+topic needs paths.topics".into())),
        _ => None,
    };
    let embeddings = match (&cfg.paths.embeddings, cfg.embedding) {
        (Some(p), EmbeddingMode::File) => Some(EmbeddingFile::read(p).map_err(|e| HarnessError::Data(e.to_string()))?),
        _ => None,
    };
    let corpus = corpus::read_jsonl(corpus_path)?;
    let (report, models) = run_experiment_on(cfg, &corpus, topics.as_ref(), embeddings.as_ref())?;
    if let Some(dir) = &cfg.paths.output {
        write_outputs(dir, cfg, &report, &models)?;
    }
    Ok(report)
}

pub fn checkpoint_metadata(cfg: &ExperimentConfig, fold: Option<usize>) -> serde_json::Value {
    serde_json::json!({ "experiment": cfg, "fold": fold })
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, report: &FoldReport, models: &[Model]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Data(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("report.json"), report.to_json()).map_err(io)?;
    std::fs::write(dir.join("report.txt"), report.to_text()).map_err(io)?;
    for (i, m) in models.iter().enumerate() {
        m.save(&dir.join(format!("fold-{i}.ckpt.json")), checkpoint_metadata(cfg, Some(i)))?;
    }
    Ok(())
}
