//! Multi-task stance and sentiment classifier: embeddings, Bi-LSTM
//! encoders, feature-specific attention and, for the shared-private variant,
//! the gate / shared-private attention / fusion path.

pub mod embedding;
pub mod layers;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stancemt_tensor::{Array, Axis, Tape, TensorError, Var};

use crate::corpus::{Sentiment, Stance};
pub use embedding::{EmbeddingError, EmbeddingFile, EmbeddingMode, Vocabulary, UNK};
use layers::{Dense, Encoder, LstmCell, Triplet};

pub const CHECKPOINT_FORMAT: &str = "stancemt-checkpoint/1";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("missing {0} target for an active task")]
    MissingTarget(&'static str),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "single-stance")]
    SingleStance,
    #[serde(rename = "single-sentiment")]
    SingleSentiment,
    #[serde(rename = "so-mt")]
    SoMt,
    #[serde(rename = "sp-mt")]
    SpMt,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::SingleStance, Variant::SingleSentiment, Variant::SoMt, Variant::SpMt];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SingleStance => "single-stance",
            Variant::SingleSentiment => "single-sentiment",
            Variant::SoMt => "so-mt",
            Variant::SpMt => "sp-mt",
        }
    }

    pub fn has_stance(self) -> bool {
        self != Variant::SingleSentiment
    }

    pub fn has_sentiment(self) -> bool {
        self != Variant::SingleStance
    }

    pub fn is_multi_task(self) -> bool {
        matches!(self, Variant::SoMt | Variant::SpMt)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Features {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "text+topic")]
    TextTopic,
}

impl Features {
    pub fn as_str(self) -> &'static str {
        match self {
            Features::Text => "text",
            Features::TextTopic => "text+topic",
        }
    }

    pub fn uses_topics(self) -> bool {
        self == Features::TextTopic
    }
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Features {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Features::Text),
            "text+topic" => Ok(Features::TextTopic),
            other => Err(format!("unknown feature set {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub features: Features,
    /// Embedding width.
    pub d: usize,
    /// LSTM hidden size per direction.
    pub d_l: usize,
    /// Attention width.
    pub d_a: usize,
    /// Shared-specific width.
    pub d_s: usize,
    pub lambda: f64,
    pub shared_loss: bool,
    pub embedding: EmbeddingMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::SpMt,
            features: Features::TextTopic,
            d: 64,
            d_l: 100,
            d_a: 100,
            d_s: 100,
            lambda: 0.5,
            shared_loss: true,
            embedding: EmbeddingMode::Trainable,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if [self.d, self.d_l, self.d_a, self.d_s].contains(&0) {
            return Err(ModelError::Config("all dimensions must be positive".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(ModelError::Config(format!("lambda must be a nonnegative number, got {}", self.lambda)));
        }
        Ok(())
    }

    fn uses_aux(&self) -> bool {
        self.variant.is_multi_task() && self.shared_loss
    }

    /// Parameter names and shapes for this configuration.
    pub fn param_shapes(&self, vocab_size: usize) -> BTreeMap<String, [usize; 2]> {
        let mut s = BTreeMap::new();
        let dense = |s: &mut BTreeMap<String, [usize; 2]>, name: &str, i: usize, o: usize| {
            s.insert(format!("{name}.w"), [i, o]);
            s.insert(format!("{name}.b"), [1, o]);
        };
        s.insert("embedding".into(), [vocab_size, self.d]);
        let streams: &[&str] = if self.features.uses_topics() { &["text", "topic"] } else { &["text"] };
        for f in streams {
            for dir in ["fwd", "bwd"] {
                let p = format!("encoder.{f}.{dir}");
                s.insert(format!("{p}.w_x"), [self.d, 4 * self.d_l]);
                s.insert(format!("{p}.w_h"), [self.d_l, 4 * self.d_l]);
                s.insert(format!("{p}.b"), [1, 4 * self.d_l]);
            }
        }
        let h = 2 * self.d_l;
        let triplet_sets: Vec<String> = match self.variant {
            Variant::SpMt => vec!["attention.stance".into(), "attention.sentiment".into()],
            _ => vec!["attention".into()],
        };
        for set in &triplet_sets {
            for f in streams {
                for proj in ["q", "k", "v"] {
                    dense(&mut s, &format!("{set}.{f}.{proj}"), h, self.d_a);
                }
            }
        }
        let (task_in, aux_in) = match self.variant {
            Variant::SpMt => {
                for task in ["stance", "sentiment"] {
                    dense(&mut s, &format!("shared.gate.{task}"), self.d_a, self.d_s);
                    dense(&mut s, &format!("shared.query.{task}"), self.d_a, self.d_s);
                    dense(&mut s, &format!("shared.fusion.{task}"), 4 * self.d_s, self.d_s);
                }
                dense(&mut s, "shared.proj", self.d_a, self.d_s);
                dense(&mut s, "shared.key", self.d_a, self.d_s);
                dense(&mut s, "shared.value", self.d_a, self.d_s);
                (self.d_a + self.d_s, self.d_s)
            }
            _ => (self.d_a, self.d_a),
        };
        if self.variant.has_stance() {
            dense(&mut s, "head.stance", task_in, 2);
        }
        if self.variant.has_sentiment() {
            dense(&mut s, "head.sentiment", task_in, 3);
        }
        if self.uses_aux() {
            dense(&mut s, "aux.stance", aux_in, 2);
            dense(&mut s, "aux.sentiment", aux_in, 3);
        }
        s
    }
}

/// Named parameter arrays in a fixed (sorted) order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams(pub BTreeMap<String, Array>);

impl ModelParams {
    pub fn get(&self, name: &str) -> Option<&Array> {
        self.0.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.0.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn count(&self) -> usize {
        self.0.values().map(Array::len).sum()
    }
}

/// A tweet mapped to vocabulary rows, with optional gold labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub text: Vec<usize>,
    pub topic: Vec<usize>,
    pub stance: Option<Stance>,
    pub sentiment: Option<Sentiment>,
}

/// Head outputs of one forward pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct Outputs {
    pub stance: Option<Var>,
    pub sentiment: Option<Var>,
    pub aux_stance: Option<Var>,
    pub aux_sentiment: Option<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Logits {
    pub stance: Option<Vec<f64>>,
    pub sentiment: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub stance: Option<Stance>,
    pub sentiment: Option<Sentiment>,
}

/// `L_task + λ·L_shared` and its parts.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub total: Var,
    pub task: Var,
    pub shared: Option<Var>,
}

/// Parameters registered on a tape.
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        *self.vars.get(name).unwrap_or_else(|| panic!("parameter {name} is not part of this model"))
    }

    pub fn dense(&self, prefix: &str) -> Dense {
        Dense { w: self.var(&format!("{prefix}.w")), b: self.var(&format!("{prefix}.b")) }
    }

    fn lstm(&self, prefix: &str) -> LstmCell {
        LstmCell {
            w_x: self.var(&format!("{prefix}.w_x")),
            w_h: self.var(&format!("{prefix}.w_h")),
            b: self.var(&format!("{prefix}.b")),
        }
    }

    pub fn encoder(&self, stream: &str) -> Encoder {
        Encoder { forward: self.lstm(&format!("encoder.{stream}.fwd")), backward: self.lstm(&format!("encoder.{stream}.bwd")) }
    }

    pub fn triplet(&self, prefix: &str) -> Triplet {
        Triplet {
            q: self.dense(&format!("{prefix}.q")),
            k: self.dense(&format!("{prefix}.k")),
            v: self.dense(&format!("{prefix}.v")),
        }
    }
}

/// Combines head losses. `λ` scales the auxiliary (shared-feature) losses;
/// with `shared_loss` off they are ignored.
pub fn total_loss(
    tape: &mut Tape,
    outs: &Outputs,
    stance: Option<usize>,
    sentiment: Option<usize>,
    lambda: f64,
    shared_loss: bool,
) -> Result<LossParts, ModelError> {
    let mut task_terms = Vec::new();
    let mut shared_terms = Vec::new();
    if let Some(logits) = outs.stance {
        let t = stance.ok_or(ModelError::MissingTarget("stance"))?;
        task_terms.push(tape.bce_loss(logits, t)?);
        if let (Some(aux), true) = (outs.aux_stance, shared_loss) {
            shared_terms.push(tape.bce_loss(aux, t)?);
        }
    }
    if let Some(logits) = outs.sentiment {
        let t = sentiment.ok_or(ModelError::MissingTarget("sentiment"))?;
        task_terms.push(tape.cce_loss(logits, t)?);
        if let (Some(aux), true) = (outs.aux_sentiment, shared_loss) {
            shared_terms.push(tape.cce_loss(aux, t)?);
        }
    }
    let task = sum_terms(tape, &task_terms)?.ok_or_else(|| ModelError::Config("model has no active task".into()))?;
    let shared = sum_terms(tape, &shared_terms)?;
    let total = match shared {
        Some(s) => {
            let scaled = tape.scale(s, lambda)?;
            tape.add(task, scaled)?
        }
        None => task,
    };
    Ok(LossParts { total, task, shared })
}

fn sum_terms(tape: &mut Tape, terms: &[Var]) -> Result<Option<Var>, TensorError> {
    let Some((&first, rest)) = terms.split_first() else { return Ok(None) };
    let mut acc = first;
    for &t in rest {
        acc = tape.add(acc, t)?;
    }
    Ok(Some(acc))
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn xavier(rng: &mut ChaCha8Rng, [rows, cols]: [usize; 2]) -> Vec<f64> {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.gen_range(-r..=r)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct StoredArray {
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    model: ModelConfig,
    vocabulary: Vocabulary,
    params: BTreeMap<String, StoredArray>,
    #[serde(default)]
    metadata: serde_json::Value,
}

impl Model {
    /// Fresh model with seeded initialization. File-mode embeddings come from
    /// `embeddings` and stay frozen.
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        seed: u64,
        embeddings: Option<&EmbeddingFile>,
    ) -> Result<Self, ModelError> {
        let mut config = config;
        let table = match (config.embedding, embeddings) {
            (EmbeddingMode::File, Some(file)) => {
                config.d = file.dim;
                Some(file.table(&vocab))
            }
            (EmbeddingMode::File, None) => return Err(ModelError::Config("file embeddings need an embedding file".into())),
            (EmbeddingMode::Trainable, _) => None,
        };
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (name, shape) in config.param_shapes(vocab.len()) {
            let array = if name == "embedding" {
                match &table {
                    Some(t) => t.clone(),
                    None => Array::new(shape[0], shape[1], xavier(&mut rng, shape))?.requires_grad(),
                }
            } else if name.ends_with(".b") {
                let mut data = vec![0.0; shape[0] * shape[1]];
                if name.starts_with("encoder.") {
                    let h = config.d_l;
                    data[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
                }
                Array::new(shape[0], shape[1], data)?.requires_grad()
            } else {
                Array::new(shape[0], shape[1], xavier(&mut rng, shape))?.requires_grad()
            };
            params.insert(name, array);
        }
        Ok(Self { config, vocab, params: ModelParams(params) })
    }

    /// Maps tokens to vocabulary rows.
    pub fn example(
        &self,
        text: &[impl AsRef<str>],
        topic: &[impl AsRef<str>],
        stance: Option<Stance>,
        sentiment: Option<Sentiment>,
    ) -> Example {
        Example { text: self.vocab.encode(text), topic: self.vocab.encode(topic), stance, sentiment }
    }

    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound { vars: self.params.0.iter().map(|(k, a)| (k.clone(), tape.leaf(a))).collect() }
    }

    fn embed(&self, tape: &mut Tape, bound: &Bound, ids: &[usize]) -> Result<Var, TensorError> {
        let ids: &[usize] = if ids.is_empty() { &[0] } else { ids };
        tape.gather_rows(bound.var("embedding"), ids)
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, ex: &Example) -> Result<Outputs, ModelError> {
        let cfg = &self.config;
        let x_t = self.embed(tape, bound, &ex.text)?;
        let h_t = layers::encode(tape, x_t, &bound.encoder("text"))?;
        let h_u = if cfg.features.uses_topics() {
            let x_u = self.embed(tape, bound, &ex.topic)?;
            Some(layers::encode(tape, x_u, &bound.encoder("topic"))?)
        } else {
            None
        };
        let attention = |tape: &mut Tape, set: &str| -> Result<Var, TensorError> {
            let text = bound.triplet(&format!("{set}.text"));
            let topic = h_u.map(|h| (h, bound.triplet(&format!("{set}.topic"))));
            layers::feature_specific_attention(tape, h_t, &text, topic.as_ref().map(|(h, t)| (*h, t)))
        };
        let mut outs = Outputs::default();
        match cfg.variant {
            Variant::SpMt => {
                let a_d = attention(tape, "attention.stance")?;
                let a_s = attention(tape, "attention.sentiment")?;
                let a_shared = layers::shared_average(tape, a_d, a_s)?;
                let proj = bound.dense("shared.proj");
                let key = bound.dense("shared.key");
                let value = bound.dense("shared.value");
                let branch = |tape: &mut Tape, a_task: Var, task: &str| -> Result<(Var, Var), TensorError> {
                    let g = layers::gate_cell(tape, a_shared, &bound.dense(&format!("shared.gate.{task}")), &proj)?;
                    let p = layers::spia(tape, a_task, a_shared, &bound.dense(&format!("shared.query.{task}")), &key, &value)?;
                    let f = layers::fuse(tape, g.output, p.output, &bound.dense(&format!("shared.fusion.{task}")))?;
                    let pooled_a = tape.mean_rows(a_task)?;
                    let pooled_f = tape.mean_rows(f)?;
                    let input = tape.concat(&[pooled_a, pooled_f], Axis::Cols)?;
                    Ok((input, pooled_f))
                };
                let (stance_in, stance_shared) = branch(tape, a_d, "stance")?;
                let (sentiment_in, sentiment_shared) = branch(tape, a_s, "sentiment")?;
                outs.stance = Some(bound.dense("head.stance").apply(tape, stance_in)?);
                outs.sentiment = Some(bound.dense("head.sentiment").apply(tape, sentiment_in)?);
                if cfg.uses_aux() {
                    outs.aux_stance = Some(bound.dense("aux.stance").apply(tape, stance_shared)?);
                    outs.aux_sentiment = Some(bound.dense("aux.sentiment").apply(tape, sentiment_shared)?);
                }
            }
            _ => {
                let a = attention(tape, "attention")?;
                let pooled = tape.mean_rows(a)?;
                if cfg.variant.has_stance() {
                    outs.stance = Some(bound.dense("head.stance").apply(tape, pooled)?);
                }
                if cfg.variant.has_sentiment() {
                    outs.sentiment = Some(bound.dense("head.sentiment").apply(tape, pooled)?);
                }
                if cfg.uses_aux() {
                    outs.aux_stance = Some(bound.dense("aux.stance").apply(tape, pooled)?);
                    outs.aux_sentiment = Some(bound.dense("aux.sentiment").apply(tape, pooled)?);
                }
            }
        }
        Ok(outs)
    }

    /// Total loss of one example on `tape`.
    pub fn loss(&self, tape: &mut Tape, bound: &Bound, ex: &Example) -> Result<LossParts, ModelError> {
        let outs = self.forward(tape, bound, ex)?;
        let stance = if self.config.variant.has_stance() { ex.stance.map(Stance::index) } else { None };
        let sentiment = if self.config.variant.has_sentiment() { ex.sentiment.map(Sentiment::index) } else { None };
        total_loss(tape, &outs, stance, sentiment, self.config.lambda, self.config.shared_loss)
    }

    /// Summed loss over `examples` without gradients.
    pub fn loss_value(&self, examples: &[Example]) -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for ex in examples {
            let mut tape = Tape::new();
            let bound = self.bind(&mut tape);
            let parts = self.loss(&mut tape, &bound, ex)?;
            sum += tape.scalar(parts.total);
        }
        Ok(sum)
    }

    /// Adds d(Σ loss)/dθ over `examples` into the parameter gradient
    /// buffers and returns the summed loss.
    pub fn accumulate_gradients(&mut self, examples: &[Example]) -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for ex in examples {
            let mut tape = Tape::new();
            let bound = self.bind(&mut tape);
            let parts = self.loss(&mut tape, &bound, ex)?;
            let loss = tape.scalar(parts.total);
            let grads = tape.backward(parts.total)?;
            for (name, param) in self.params.0.iter_mut() {
                if param.is_trainable() {
                    grads.accumulate_into(bound.var(name), param)?;
                }
            }
            sum += loss;
        }
        Ok(sum)
    }

    /// Trainable parameters in name order.
    pub fn trainable_mut(&mut self) -> Vec<&mut Array> {
        self.params.0.values_mut().filter(|a| a.is_trainable()).collect()
    }

    pub fn scale_gradients(&mut self, factor: f64) {
        for p in self.params.0.values_mut() {
            if let Some(g) = p.grad_mut() {
                g.iter_mut().for_each(|x| *x *= factor);
            }
        }
    }

    pub fn zero_gradients(&mut self) {
        self.params.0.values_mut().for_each(Array::zero_grad);
    }

    pub fn logits(&self, ex: &Example) -> Result<Logits, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let outs = self.forward(&mut tape, &bound, ex)?;
        let read = |v: Option<Var>| v.map(|v| tape.value(v).data().to_vec());
        Ok(Logits { stance: read(outs.stance), sentiment: read(outs.sentiment) })
    }

    pub fn predict(&self, ex: &Example) -> Result<Prediction, ModelError> {
        let l = self.logits(ex)?;
        Ok(Prediction {
            stance: l.stance.as_deref().and_then(|x| Stance::from_index(argmax(x))),
            sentiment: l.sentiment.as_deref().and_then(|x| Sentiment::from_index(argmax(x))),
        })
    }

    /// Checkpoint JSON: model config, vocabulary, every named array and
    /// caller-supplied metadata.
    pub fn to_checkpoint_json(&self, metadata: serde_json::Value) -> String {
        let params = self
            .params
            .0
            .iter()
            .map(|(k, a)| (k.clone(), StoredArray { shape: a.shape(), data: a.data().to_vec() }))
            .collect();
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            model: self.config.clone(),
            vocabulary: self.vocab.clone(),
            params,
            metadata,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<(Self, serde_json::Value), ModelError> {
        let bad = |msg: String| ModelError::Checkpoint { path: "<memory>".into(), msg };
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unsupported format {:?}", ck.format)));
        }
        ck.model.validate()?;
        let expected = ck.model.param_shapes(ck.vocabulary.len());
        if expected.keys().ne(ck.params.keys()) {
            return Err(bad("parameter names do not match the model config".into()));
        }
        let mut params = BTreeMap::new();
        for (name, stored) in ck.params {
            let shape = expected[&name];
            let shape = if name == "embedding" { [shape[0], stored.shape[1]] } else { shape };
            if stored.shape != shape {
                return Err(bad(format!("{name}: shape {:?}, expected {shape:?}", stored.shape)));
            }
            let mut array = Array::new(shape[0], shape[1], stored.data)?;
            let frozen = name == "embedding" && ck.model.embedding == EmbeddingMode::File;
            array.set_requires_grad(!frozen);
            params.insert(name, array);
        }
        Ok((Self { config: ck.model, vocab: ck.vocabulary, params: ModelParams(params) }, ck.metadata))
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<(), ModelError> {
        std::fs::write(path, self.to_checkpoint_json(metadata))
            .map_err(|e| ModelError::Checkpoint { path: path.display().to_string(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value), ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Checkpoint { path: path.display().to_string(), msg: e.to_string() })?;
        Self::from_checkpoint_json(&text).map_err(|e| match e {
            ModelError::Checkpoint { msg, .. } => ModelError::Checkpoint { path: path.display().to_string(), msg },
            other => other,
        })
    }
}
