use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{MeanStd, TaskMetrics};
use super::train::EpochStats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    /// Training examples after oversampling.
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub stance: Option<TaskMetrics>,
    pub sentiment: Option<TaskMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
}

impl TaskSummary {
    fn over<'a>(tasks: impl Iterator<Item = Option<&'a TaskMetrics>>) -> Option<Self> {
        let tasks: Vec<&TaskMetrics> = tasks.collect::<Option<_>>()?;
        let acc: Vec<f64> = tasks.iter().map(|t| t.accuracy).collect();
        let f1: Vec<f64> = tasks.iter().map(|t| t.macro_f1).collect();
        Some(Self { accuracy: MeanStd::of(&acc), macro_f1: MeanStd::of(&f1) })
    }
}

/// Per-fold results and their mean ± population std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub config: ExperimentConfig,
    pub folds: Vec<FoldEntry>,
    pub stance: Option<TaskSummary>,
    pub sentiment: Option<TaskSummary>,
}

impl FoldReport {
    pub fn new(config: ExperimentConfig, folds: Vec<FoldEntry>) -> Self {
        let stance = TaskSummary::over(folds.iter().map(|f| f.stance.as_ref()));
        let sentiment = TaskSummary::over(folds.iter().map(|f| f.sentiment.as_ref()));
        Self { config, folds, stance, sentiment }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        writeln!(out, "variant {}  features {}  folds {}  seed {}  epochs {}", c.variant, c.features, c.folds, c.seed, c.epochs).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "{:<6} {:<10} {:>10} {:>10} {:>6} {:>6}", "fold", "task", "accuracy", "macro_f1", "best", "test").unwrap();
        for f in &self.folds {
            for (name, task) in [("stance", &f.stance), ("sentiment", &f.sentiment)] {
                if let Some(t) = task {
                    writeln!(
                        out,
                        "{:<6} {:<10} {:>10.4} {:>10.4} {:>6} {:>6}",
                        f.fold, name, t.accuracy, t.macro_f1, f.best_epoch, f.test_size
                    )
                    .unwrap();
                }
            }
        }
        writeln!(out).unwrap();
        for (name, summary) in [("stance", &self.stance), ("sentiment", &self.sentiment)] {
            if let Some(s) = summary {
                writeln!(
                    out,
                    "{:<6} {:<10} {:>7.4} ± {:.4} {:>7.4} ± {:.4}",
                    "mean", name, s.accuracy.mean, s.accuracy.std, s.macro_f1.mean, s.macro_f1.std
                )
                .unwrap();
            }
        }
        out
    }
}
