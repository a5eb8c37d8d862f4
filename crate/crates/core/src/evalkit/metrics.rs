use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parse::ParsedAnswer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Percentages in `[0, 100]`; `None` when no query was answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub oa: Option<f64>,
    pub ma_pre: Option<f64>,
    pub ma_recl: Option<f64>,
    pub ma_f1: Option<f64>,
    pub per_class: Vec<ClassScore>,
    pub answered: usize,
    pub total: usize,
    pub answered_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    /// Unclamped; `None` for fewer than two pairs or constant targets.
    pub r2: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub r2: Option<f64>,
    pub oa: Option<f64>,
    pub answered: usize,
    pub total: usize,
    pub answered_rate: f64,
}

fn rate(answered: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        answered as f64 / total as f64
    }
}

/// Labels come from `ParsedAnswer::as_label`; other answers are unanswered.
/// Macro averages run over classes present in the answered ground truth.
pub fn classification_metrics(pairs: &[(String, ParsedAnswer)]) -> ClassificationReport {
    let answered: Vec<(&str, String)> = pairs
        .iter()
        .filter_map(|(gt, p)| p.as_label().map(|l| (gt.as_str(), l)))
        .collect();
    let total = pairs.len();
    if answered.is_empty() {
        return ClassificationReport {
            oa: None,
            ma_pre: None,
            ma_recl: None,
            ma_f1: None,
            per_class: Vec::new(),
            answered: 0,
            total,
            answered_rate: 0.0,
        };
    }
    let classes: BTreeSet<&str> = answered.iter().map(|(g, _)| *g).collect();
    let mut per_class = Vec::with_capacity(classes.len());
    for &c in &classes {
        let tp = answered.iter().filter(|(g, p)| *g == c && p == c).count();
        let predicted = answered.iter().filter(|(_, p)| p == c).count();
        let support = answered.iter().filter(|(g, _)| *g == c).count();
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = tp as f64 / support as f64;
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        per_class.push(ClassScore { class: c.to_string(), precision, recall, f1, support });
    }
    let k = per_class.len() as f64;
    let macro_of = |f: fn(&ClassScore) -> f64| Some(100.0 * per_class.iter().map(f).sum::<f64>() / k);
    let correct = answered.iter().filter(|(g, p)| g == p).count();
    ClassificationReport {
        oa: Some(100.0 * correct as f64 / answered.len() as f64),
        ma_pre: macro_of(|s| s.precision),
        ma_recl: macro_of(|s| s.recall),
        ma_f1: macro_of(|s| s.f1),
        answered: answered.len(),
        total,
        answered_rate: rate(answered.len(), total),
        per_class,
    }
}

/// Pairs are `(ground truth, prediction)` in the same units.
pub fn regression_metrics(pairs: &[(f64, f64)]) -> RegressionReport {
    let n = pairs.len();
    if n == 0 {
        return RegressionReport { rmse: None, mae: None, r2: None, n };
    }
    let nf = n as f64;
    let ss_res: f64 = pairs.iter().map(|(g, p)| (g - p) * (g - p)).sum();
    let mae = pairs.iter().map(|(g, p)| (g - p).abs()).sum::<f64>() / nf;
    let mean = pairs.iter().map(|(g, _)| g).sum::<f64>() / nf;
    let ss_tot: f64 = pairs.iter().map(|(g, _)| (g - mean) * (g - mean)).sum();
    let r2 = if n >= 2 && ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None };
    RegressionReport { rmse: Some((ss_res / nf).sqrt()), mae: Some(mae), r2, n }
}

/// Regression metrics over answered pairs plus exact-match accuracy after
/// rounding the parsed value to the nearest integer.
pub fn counting_metrics(pairs: &[(i64, ParsedAnswer)]) -> CountingReport {
    let answered: Vec<(f64, f64)> = pairs
        .iter()
        .filter_map(|(g, p)| p.as_number().map(|v| (*g as f64, v)))
        .collect();
    let reg = regression_metrics(&answered);
    let exact = answered.iter().filter(|(g, p)| p.round() == *g).count();
    CountingReport {
        rmse: reg.rmse,
        mae: reg.mae,
        r2: reg.r2,
        oa: (!answered.is_empty()).then(|| 100.0 * exact as f64 / answered.len() as f64),
        answered: answered.len(),
        total: pairs.len(),
        answered_rate: rate(answered.len(), pairs.len()),
    }
}
