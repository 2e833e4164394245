use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stancemt::corpus::{self, TweetRecord};
use stancemt::harness::{self, train, ExperimentConfig, HarnessError};
use stancemt::model::{EmbeddingMode, Features, Model, Variant};
use stancemt::sentiment::{self, SentimentEnsemble};
use stancemt::stance::{self, NodeOrder, PropagationConfig, SeedSet};
use stancemt::text::TextPipeline;
use stancemt::topics::{self, TopicModel};

#[derive(Parser)]
#[command(name = "stancemt", version, about = "Climate-stance corpus annotation and multi-task stance/sentiment models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label tweets denier/believer by hashtag label propagation.
    AnnotateStance(StanceArgs),
    /// Label tweet sentiment by majority vote of three lexicon scorers.
    AnnotateSentiment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build or check the per-tweet topic file.
    Topics(TopicArgs),
    /// Stance annotation, sentiment annotation and topics in one go.
    Pipeline {
        #[command(flatten)]
        stance: StanceArgs,
        /// Topic file to write next to the annotated corpus.
        #[arg(long)]
        topics_out: PathBuf,
        #[arg(long, default_value_t = topics::DEFAULT_K_TOPICS)]
        k: usize,
        #[arg(long, default_value_t = 13)]
        topic_seed: u64,
    },
    /// Cross-validated training run.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Evaluate(CheckpointArgs),
    /// Predict labels for a corpus with a checkpoint.
    Predict {
        #[command(flatten)]
        common: CheckpointArgs,
        /// Write JSONL here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StanceArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSON file with `denier` and `believer` hashtag arrays; bundled seeds when omitted.
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    gamma: u32,
    #[arg(long, default_value_t = 100)]
    max_rounds: u32,
    #[arg(long, default_value = "insertion", value_parser = ["insertion", "lexicographic"])]
    node_order: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TopicArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "baseline", value_parser = ["baseline", "external"])]
    mode: String,
    /// Topic file to check in external mode.
    #[arg(long, required_if_eq("mode", "external"))]
    topics: Option<PathBuf>,
    #[arg(long, default_value_t = topics::DEFAULT_K_TOPICS)]
    k: usize,
    #[arg(long, default_value_t = 13)]
    seed: u64,
    /// Seed hashtags stripped from documents; bundled seeds when omitted.
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Every flag overrides the matching config key.
#[derive(Args)]
struct TrainArgs {
    /// TOML experiment config; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    features: Option<Features>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_l: Option<usize>,
    #[arg(long)]
    d_a: Option<usize>,
    #[arg(long)]
    d_s: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    shared_loss: Option<bool>,
    #[arg(long)]
    accumulation: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long, value_parser = ["trainable", "file"])]
    embedding: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    topics: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckpointArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Topic file; required for text+topic checkpoints.
    #[arg(long)]
    topics: Option<PathBuf>,
}

fn data_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(e.to_string())
}

fn read_seeds(path: Option<&Path>) -> Result<SeedSet, HarnessError> {
    match path {
        None => Ok(SeedSet::bundled()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| data_err(format!("{}: {e}", p.display())))?;
            SeedSet::from_json(&text).map_err(data_err)
        }
    }
}

fn annotate_stance(args: &StanceArgs, corpus: &mut [TweetRecord]) -> Result<(), HarnessError> {
    let seeds = read_seeds(args.seeds.as_deref())?;
    if args.gamma == 0 {
        return Err(HarnessError::Config("gamma must be positive".into()));
    }
    let node_order = if args.node_order == "lexicographic" { NodeOrder::Lexicographic } else { NodeOrder::Insertion };
    let cfg = PropagationConfig { gamma: args.gamma, max_rounds: args.max_rounds, node_order };
    let stats = stance::annotate(corpus, &seeds, &cfg);
    log::info!(
        "propagation: {} rounds, relaxation {}, {} hashtags labeled",
        stats.rounds_executed,
        stats.final_relaxation,
        stats.labeled
    );
    Ok(())
}

fn fit_topics(corpus: &[TweetRecord], seeds: &SeedSet, k: usize, seed: u64) -> Result<TopicModel, HarnessError> {
    let docs = topics::topic_documents(corpus, TextPipeline::bundled(), seeds);
    Ok(topics::fit_baseline(&docs, k, seed)?)
}

fn write_topics(path: &Path, model: &TopicModel) -> Result<(), HarnessError> {
    std::fs::write(path, model.to_json()).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn train_config(args: TrainArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { cfg.$field = v; } )* };
    }
    set!(variant, features, folds, seed, epochs, lambda, m, p, d, d_l, d_a, d_s, learning_rate, shared_loss, accumulation, validation_fraction, max_tokens);
    if let Some(e) = args.embedding {
        cfg.embedding = if e == "file" { EmbeddingMode::File } else { EmbeddingMode::Trainable };
    }
    for (slot, v) in [
        (&mut cfg.paths.corpus, args.corpus),
        (&mut cfg.paths.topics, args.topics),
        (&mut cfg.paths.embeddings, args.embeddings),
        (&mut cfg.paths.output, args.output),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Model, the experiment config stored with it, and the corpus prepared
/// for it.
fn load_for_checkpoint(
    args: &CheckpointArgs,
    require_labels: bool,
) -> Result<(Model, Vec<harness::PreparedRecord>), HarnessError> {
    let (model, meta) = Model::load(&args.checkpoint)?;
    let mut cfg: ExperimentConfig = match meta.get("experiment") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| data_err(format!("checkpoint metadata: {e}")))?,
        None => ExperimentConfig::default(),
    };
    cfg.variant = model.config.variant;
    cfg.features = model.config.features;
    let topics = match (&args.topics, cfg.features.uses_topics()) {
        (Some(p), true) => Some(topics::load_external(p)?),
        (None, true) => return Err(HarnessError::Config("this checkpoint uses topic features; pass --topics".into())),
        _ => None,
    };
    let corpus = corpus::read_jsonl(&args.corpus)?;
    let records = harness::prepare(&corpus, &cfg, topics.as_ref(), require_labels)?;
    Ok((model, records))
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::AnnotateStance(args) => {
            let mut corpus = corpus::read_jsonl(&args.corpus)?;
            annotate_stance(&args, &mut corpus)?;
            corpus::write_jsonl(&args.out, &corpus)?;
        }
        Command::AnnotateSentiment { corpus: input, out } => {
            let mut corpus = corpus::read_jsonl(&input)?;
            sentiment::annotate(&mut corpus, TextPipeline::bundled(), &SentimentEnsemble::default());
            corpus::write_jsonl(&out, &corpus)?;
        }
        Command::Topics(args) => {
            let corpus = corpus::read_jsonl(&args.corpus)?;
            let model = if args.mode == "external" {
                let path = args.topics.as_ref().expect("clap enforces --topics");
                let model = topics::load_external(path)?;
                if let Some(r) = corpus.iter().find(|r| !model.doc_topic.contains_key(&r.id)) {
                    return Err(topics::TopicError::UnknownTweet(r.id.clone()).into());
                }
                model
            } else {
                fit_topics(&corpus, &read_seeds(args.seeds.as_deref())?, args.k, args.seed)?
            };
            write_topics(&args.out, &model)?;
        }
        Command::Pipeline { stance, topics_out, k, topic_seed } => {
            let mut corpus = corpus::read_jsonl(&stance.corpus)?;
            annotate_stance(&stance, &mut corpus)?;
            sentiment::annotate(&mut corpus, TextPipeline::bundled(), &SentimentEnsemble::default());
            let model = fit_topics(&corpus, &read_seeds(stance.seeds.as_deref())?, k, topic_seed)?;
            corpus::write_jsonl(&stance.out, &corpus)?;
            write_topics(&topics_out, &model)?;
        }
        Command::Train(args) => {
            let report = harness::run_experiment(&train_config(args)?)?;
            print!("{}", report.to_text());
        }
        Command::Evaluate(args) => {
            let (model, records) = load_for_checkpoint(&args, true)?;
            let examples: Vec<_> = records.iter().map(|r| model.example(&r.text, &r.topic, r.stance, r.sentiment)).collect();
            let eval = train::evaluate(&model, &examples)?;
            println!("{}", serde_json::to_string_pretty(&eval).expect("metrics serialize"));
        }
        Command::Predict { common, out } => {
            let (model, records) = load_for_checkpoint(&common, false)?;
            let mut lines = String::new();
            for r in &records {
                let ex = model.example(&r.text, &r.topic, None, None);
                let logits = model.logits(&ex)?;
                let pred = model.predict(&ex)?;
                let row = serde_json::json!({
                    "id": r.id,
                    "stance": pred.stance,
                    "sentiment": pred.sentiment,
                    "stance_logits": logits.stance,
                    "sentiment_logits": logits.sentiment,
                });
                lines.push_str(&row.to_string());
                lines.push('\n');
            }
            match out {
                Some(p) => std::fs::write(&p, lines).map_err(|e| data_err(format!("{}: {e}", p.display())))?,
                None => print!("{lines}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
