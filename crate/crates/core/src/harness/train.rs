use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use stancemt_tensor::{Adam, TensorError};

use super::metrics::{metrics, TaskMetrics};
use super::HarnessError;
use crate::corpus::{Sentiment, Stance};
use crate::model::{Example, Model, ModelError, ModelParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub accumulation: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub stance: Option<TaskMetrics>,
    pub sentiment: Option<TaskMetrics>,
}

fn numeric(epoch: usize, step: usize, e: ModelError) -> HarnessError {
    match e {
        ModelError::Tensor(t @ TensorError::NonFinite { .. }) => HarnessError::NonFinite { epoch, step, msg: t.to_string() },
        ModelError::Config(m) => HarnessError::Config(m),
        other => HarnessError::Data(other.to_string()),
    }
}

/// Accuracy on the model's primary task (stance when present).
pub fn primary_accuracy(model: &Model, examples: &[Example]) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for ex in examples {
        let p = model.predict(ex)?;
        let hit = if model.config.variant.has_stance() { p.stance == ex.stance } else { p.sentiment == ex.sentiment };
        correct += usize::from(hit);
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Test metrics for each task the model predicts, over examples that carry
/// a gold label for that task.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<Evaluation, ModelError> {
    let mut stance = (Vec::new(), Vec::new());
    let mut sentiment = (Vec::new(), Vec::new());
    for ex in examples {
        let p = model.predict(ex)?;
        if let (Some(pred), Some(gold)) = (p.stance, ex.stance) {
            stance.0.push(pred.index());
            stance.1.push(gold.index());
        }
        if let (Some(pred), Some(gold)) = (p.sentiment, ex.sentiment) {
            sentiment.0.push(pred.index());
            sentiment.1.push(gold.index());
        }
    }
    let v = model.config.variant;
    let task = |(p, g): (Vec<usize>, Vec<usize>), classes| metrics(&p, &g, classes).expect("aligned labels");
    Ok(Evaluation {
        stance: v.has_stance().then(|| task(stance, Stance::ALL.len())),
        sentiment: v.has_sentiment().then(|| task(sentiment, Sentiment::ALL.len())),
    })
}

/// Shuffled single-example passes with Adam updates every
/// `accumulation` examples (averaged gradients). Keeps the parameters of
/// the epoch with the best validation accuracy, earliest on ties, or the
/// best training accuracy when there is no validation data.
pub fn fit(
    model: &mut Model,
    train: &[Example],
    validation: &[Example],
    opts: &FitOptions,
    rng: &mut impl Rng,
) -> Result<FitHistory, HarnessError> {
    if train.is_empty() {
        return Err(HarnessError::Data("no training examples".into()));
    }
    let mut adam = Adam::new(opts.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut epochs = Vec::with_capacity(opts.epochs);
    model.zero_gradients();

    for epoch in 1..=opts.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut pending = 0;
        for (step, &i) in order.iter().enumerate() {
            let loss = model.accumulate_gradients(std::slice::from_ref(&train[i])).map_err(|e| numeric(epoch, step + 1, e))?;
            if !loss.is_finite() {
                return Err(HarnessError::NonFinite { epoch, step: step + 1, msg: format!("loss = {loss}") });
            }
            total += loss;
            pending += 1;
            if pending == opts.accumulation || step + 1 == order.len() {
                model.scale_gradients(1.0 / pending as f64);
                adam.step(&mut model.trainable_mut())
                    .map_err(|e| numeric(epoch, step + 1, ModelError::Tensor(e)))?;
                pending = 0;
            }
        }
        let train_accuracy = primary_accuracy(model, train).map_err(|e| numeric(epoch, 0, e))?;
        let validation_accuracy = if validation.is_empty() {
            None
        } else {
            Some(primary_accuracy(model, validation).map_err(|e| numeric(epoch, 0, e))?)
        };
        let score = validation_accuracy.unwrap_or(train_accuracy);
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, epoch, model.params.clone()));
        }
        log::debug!("epoch {epoch}: loss {:.4} train acc {train_accuracy:.4} val acc {validation_accuracy:?}", total / train.len() as f64);
        epochs.push(EpochStats { epoch, mean_loss: total / train.len() as f64, train_accuracy, validation_accuracy });
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    model.zero_gradients();
    Ok(FitHistory { epochs, best_epoch })
}
