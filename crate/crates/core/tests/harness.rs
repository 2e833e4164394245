use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stancemt::corpus::{self, Sentiment, Stance, TweetRecord};
use stancemt::harness::train::{fit, primary_accuracy, FitOptions};
use stancemt::harness::{run_experiment, run_experiment_on, ExperimentConfig, HarnessError};
use stancemt::model::{Features, Model, ModelConfig, Variant, Vocabulary};
use stancemt::sentiment::{self, SentimentEnsemble};
use stancemt::stance::{self, PropagationConfig, SeedSet};
use stancemt::synthetic::{generate, SyntheticConfig};
use stancemt::text::TextPipeline;
use stancemt::topics::{self, TopicModel};

fn mini_corpus() -> Vec<TweetRecord> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini_corpus.jsonl");
    corpus::read_jsonl(&path).unwrap()
}

/// Mini-corpus with weak stance and sentiment labels plus baseline topics.
fn annotated_mini_corpus() -> (Vec<TweetRecord>, TopicModel) {
    let mut corpus = mini_corpus();
    let seeds = SeedSet::bundled();
    stance::annotate(&mut corpus, &seeds, &PropagationConfig::default());
    sentiment::annotate(&mut corpus, TextPipeline::bundled(), &SentimentEnsemble::default());
    let docs = topics::topic_documents(&corpus, TextPipeline::bundled(), &seeds);
    let model = topics::fit_baseline(&docs, topics::DEFAULT_K_TOPICS, 13).unwrap();
    (corpus, model)
}

fn small(variant: Variant, features: Features) -> ExperimentConfig {
    ExperimentConfig {
        variant,
        features,
        folds: 2,
        epochs: 2,
        learning_rate: 0.01,
        d: 8,
        d_l: 4,
        d_a: 4,
        d_s: 4,
        ..ExperimentConfig::default()
    }
}

#[test]
fn mini_corpus_run_with_default_dimensions() {
    let (corpus, topic_model) = annotated_mini_corpus();
    let cfg = ExperimentConfig { folds: 2, epochs: 5, ..ExperimentConfig::default() };
    let start = Instant::now();
    let (report, models) = run_experiment_on(&cfg, &corpus, Some(&topic_model), None).unwrap();
    assert!(start.elapsed() < Duration::from_secs(600), "{:?}", start.elapsed());
    assert_eq!(report.folds.len(), 2);
    assert_eq!(models.len(), 2);
    let stance = report.stance.as_ref().unwrap();
    let folds: Vec<f64> = report.folds.iter().map(|f| f.stance.as_ref().unwrap().accuracy).collect();
    assert!((stance.accuracy.mean - (folds[0] + folds[1]) / 2.0).abs() < 1e-15);
    assert!(folds.iter().all(|a| (0.0..=1.0).contains(a)));
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 200);
}

#[test]
fn both_feature_sets_complete_and_report_their_config() {
    let (corpus, topic_model) = annotated_mini_corpus();
    for features in [Features::Text, Features::TextTopic] {
        let cfg = small(Variant::SpMt, features);
        let (report, _) = run_experiment_on(&cfg, &corpus, Some(&topic_model), None).unwrap();
        assert_eq!(report.config, cfg);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["config"]["features"], features.to_string());
        assert!(report.to_text().contains(&format!("features {features}")));
    }
}

#[test]
fn every_variant_runs() {
    let (corpus, topic_model) = annotated_mini_corpus();
    for variant in Variant::ALL {
        let (report, _) = run_experiment_on(&small(variant, Features::TextTopic), &corpus, Some(&topic_model), None).unwrap();
        assert_eq!(report.stance.is_some(), variant.has_stance(), "{variant}");
        assert_eq!(report.sentiment.is_some(), variant.has_sentiment(), "{variant}");
    }
}

#[test]
fn missing_topic_file_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("c.jsonl");
    corpus::write_jsonl(&corpus_path, &generate(&SyntheticConfig { tweets: 20, ..Default::default() })).unwrap();
    let mut cfg = small(Variant::SpMt, Features::TextTopic);
    cfg.paths.corpus = Some(corpus_path);
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 1);

    cfg.paths.topics = Some(dir.path().join("absent.json"));
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn same_seed_gives_identical_reports() {
    let corpus = generate(&SyntheticConfig { tweets: 60, ..Default::default() });
    let cfg = small(Variant::SoMt, Features::Text);
    let (a, _) = run_experiment_on(&cfg, &corpus, None, None).unwrap();
    let (b, _) = run_experiment_on(&cfg, &corpus, None, None).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let other = ExperimentConfig { seed: cfg.seed + 1, ..cfg };
    let (c, _) = run_experiment_on(&other, &corpus, None, None).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn unlabeled_records_are_skipped() {
    let mut corpus = generate(&SyntheticConfig { tweets: 40, ..Default::default() });
    corpus[0].stance_label = None;
    corpus[1].sentiment_label = None;
    let (report, _) = run_experiment_on(&small(Variant::SpMt, Features::Text), &corpus, None, None).unwrap();
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 38);
    let (report, _) = run_experiment_on(&small(Variant::SingleStance, Features::Text), &corpus, None, None).unwrap();
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 39);
}

fn separable(n: usize) -> (Model, Vec<stancemt::model::Example>) {
    let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
    let vocab = Vocabulary::build(words);
    let config = ModelConfig { variant: Variant::SingleStance, features: Features::Text, d: 8, d_l: 4, d_a: 4, d_s: 4, ..ModelConfig::default() };
    let model = Model::new(config, vocab, 5, None).unwrap();
    let examples = (0..n)
        .map(|i| {
            let (cue, stance) = if i % 2 == 0 { ("alpha", Stance::Denier) } else { ("omega", Stance::Believer) };
            let filler = words[1 + i % 4];
            model.example(&[filler, cue, words[1 + (i / 2) % 4]], &[] as &[&str], Some(stance), Some(Sentiment::Neutral))
        })
        .collect();
    (model, examples)
}

#[test]
fn separable_corpus_is_learned_within_thirty_epochs() {
    let (mut model, examples) = separable(50);
    let opts = FitOptions { epochs: 30, learning_rate: 0.01, accumulation: 1 };
    let history = fit(&mut model, &examples, &[], &opts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(history.epochs.len(), 30);
    assert!(primary_accuracy(&model, &examples).unwrap() >= 0.95);
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (mut model, examples) = separable(10);
    let before = model.params.clone();
    let opts = FitOptions { epochs: 2, learning_rate: 0.0, accumulation: 3 };
    fit(&mut model, &examples, &examples[..2], &opts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for (name, p) in &before.0 {
        assert_eq!(p.data(), model.params.0[name].data(), "{name}");
    }
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("c.jsonl");
    corpus::write_jsonl(&corpus_path, &generate(&SyntheticConfig { tweets: 30, ..Default::default() })).unwrap();
    let mut cfg = small(Variant::SingleSentiment, Features::Text);
    cfg.paths.corpus = Some(corpus_path);
    cfg.paths.output = Some(dir.path().join("out"));
    let report = run_experiment(&cfg).unwrap();
    let out = dir.path().join("out");
    let json = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert_eq!(json, report.to_json());
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), report.to_text());
    let (model, meta) = Model::load(&out.join("fold-1.ckpt.json")).unwrap();
    assert_eq!(model.config.variant, Variant::SingleSentiment);
    assert_eq!(meta["fold"], 1);
    let stored: ExperimentConfig = serde_json::from_value(meta["experiment"].clone()).unwrap();
    assert_eq!(stored, cfg);
}
