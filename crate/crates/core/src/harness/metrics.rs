use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("label {label} outside 0..{classes}")]
    LabelRange { label: usize, classes: usize },
    #[error("unknown stance label {0:?}; expected favor, against or none")]
    UnknownLabel(String),
    #[error("need at least two samples per group")]
    TooFewSamples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `None` for classes absent from both gold and predictions.
    pub per_class_f1: Vec<Option<f64>>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn confusion_matrix(predictions: &[usize], gold: &[usize], classes: usize) -> Result<Vec<Vec<usize>>, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &g) in predictions.iter().zip(gold) {
        for label in [p, g] {
            if label >= classes {
                return Err(MetricsError::LabelRange { label, classes });
            }
        }
        m[g][p] += 1;
    }
    Ok(m)
}

/// Per-class `2TP / (2TP + FP + FN)` from a confusion matrix.
fn class_f1(m: &[Vec<usize>], c: usize) -> Option<f64> {
    let tp = m[c][c];
    let fn_ = m[c].iter().sum::<usize>() - tp;
    let fp = m.iter().map(|row| row[c]).sum::<usize>() - tp;
    let denom = 2 * tp + fp + fn_;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

/// Accuracy, per-class F1 and their unweighted mean over classes seen in
/// gold or predictions.
pub fn metrics(predictions: &[usize], gold: &[usize], classes: usize) -> Result<TaskMetrics, MetricsError> {
    let confusion = confusion_matrix(predictions, gold, classes)?;
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let accuracy = if gold.is_empty() { 0.0 } else { correct as f64 / gold.len() as f64 };
    let per_class_f1: Vec<Option<f64>> = (0..classes).map(|c| class_f1(&confusion, c)).collect();
    let present: Vec<f64> = per_class_f1.iter().flatten().copied().collect();
    let macro_f1 = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    Ok(TaskMetrics { accuracy, macro_f1, per_class_f1, confusion })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemevalScores {
    /// `(F1_favor + F1_against) / 2` per target.
    pub f_avg: BTreeMap<String, f64>,
    pub macf_avg: f64,
}

fn semeval_label(s: &str) -> Result<usize, MetricsError> {
    match s.to_ascii_lowercase().as_str() {
        "favor" => Ok(0),
        "against" => Ok(1),
        "none" => Ok(2),
        _ => Err(MetricsError::UnknownLabel(s.to_string())),
    }
}

/// Favor/against F1 average per target and its mean over targets. A class
/// with no gold or predicted members scores 0.
pub fn semeval_metrics(targets: &[&str], predictions: &[&str], gold: &[&str]) -> Result<SemevalScores, MetricsError> {
    if predictions.len() != gold.len() || targets.len() != gold.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let mut grouped: BTreeMap<String, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for ((t, p), g) in targets.iter().zip(predictions).zip(gold) {
        let entry = grouped.entry(t.to_string()).or_default();
        entry.0.push(semeval_label(p)?);
        entry.1.push(semeval_label(g)?);
    }
    let mut f_avg = BTreeMap::new();
    for (target, (p, g)) in grouped {
        let m = confusion_matrix(&p, &g, 3)?;
        let favor = class_f1(&m, 0).unwrap_or(0.0);
        let against = class_f1(&m, 1).unwrap_or(0.0);
        f_avg.insert(target, (favor + against) / 2.0);
    }
    let macf_avg = if f_avg.is_empty() { 0.0 } else { f_avg.values().sum::<f64>() / f_avg.len() as f64 };
    Ok(SemevalScores { f_avg, macf_avg })
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Welch's unequal-variance t-test on two samples.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewSamples);
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let (sa, sb) = (va / na, vb / nb);
    let se = (sa + sb).sqrt();
    if se == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        return Ok(WelchTest { t: if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) }, df: na + nb - 2.0, p_value });
    }
    let t = (ma - mb) / se;
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(WelchTest { t, df, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let m = metrics(&[0, 1, 1, 1], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(metrics(&[0, 1, 1], &[0, 1, 1], 2).unwrap().macro_f1, 1.0);
        // gold [d, d, b, b], predicted [d, b, b, b]
        let m = metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.per_class_f1, vec![Some(2.0 / 3.0), Some(0.8)]);
        assert!((m.macro_f1 - 0.7333333333333334).abs() < 1e-15);
        assert!(matches!(metrics(&[0], &[0, 1], 2), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn absent_classes_are_excluded() {
        let m = metrics(&[0, 0], &[0, 0], 3).unwrap();
        assert_eq!(m.per_class_f1, vec![Some(1.0), None, None]);
        assert_eq!(m.macro_f1, 1.0);
        // class 1 in gold but never predicted contributes 0
        let m = metrics(&[0, 0], &[0, 1], 3).unwrap();
        assert_eq!(m.per_class_f1, vec![Some(2.0 / 3.0), Some(0.0), None]);
    }

    #[test]
    fn semeval_examples() {
        let t = ["a"; 4];
        let s = semeval_metrics(&t, &["favor", "against", "none", "favor"], &["favor", "against", "none", "favor"]).unwrap();
        assert_eq!(s.f_avg["a"], 1.0);
        let s = semeval_metrics(&t, &["none"; 4], &["favor", "against", "none", "favor"]).unwrap();
        assert_eq!(s.f_avg["a"], 0.0);
        assert!(semeval_metrics(&["a"], &["maybe"], &["none"]).is_err());
    }

    #[test]
    fn population_std() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    #[test]
    fn welch_reference_values() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4];
        let w = welch_t_test(&a, &b).unwrap();
        assert!((w.t - -2.455356398286006).abs() < 1e-12, "{w:?}");
        assert!((w.df - 24.988529290231416).abs() < 1e-9, "{w:?}");
        assert!((w.p_value - 0.021378001462866985).abs() < 1e-9, "{w:?}");
    }
}
