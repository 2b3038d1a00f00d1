//! Support-weighted multiclass precision, recall and F1, and pair-based join scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no gold labels to weight by")]
    EmptyStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Number of gold items with this class.
    pub support: u64,
}

/// Per-class confusion counts, keyed by label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionStats {
    classes: BTreeMap<String, ClassCounts>,
}

impl ConfusionStats {
    pub fn classes(&self) -> &BTreeMap<String, ClassCounts> {
        &self.classes
    }

    pub fn total_support(&self) -> u64 {
        self.classes.values().map(|c| c.support).sum()
    }

    fn record(&mut self, prediction: Option<&str>, gold: &str) {
        self.classes.entry(gold.to_owned()).or_default().support += 1;
        match prediction {
            Some(p) if p == gold => self.classes.get_mut(gold).expect("inserted above").tp += 1,
            Some(p) => {
                self.classes.entry(p.to_owned()).or_default().fp += 1;
                self.classes.get_mut(gold).expect("inserted above").fn_ += 1;
            }
            None => self.classes.get_mut(gold).expect("inserted above").fn_ += 1,
        }
    }
}

/// Confusion counts of `predictions` against `golds`.
pub fn per_class_stats<P: AsRef<str>, G: AsRef<str>>(
    predictions: &[P],
    golds: &[G],
) -> Result<ConfusionStats, MetricsError> {
    let predictions: Vec<Option<&str>> = predictions.iter().map(|p| Some(p.as_ref())).collect();
    per_class_stats_opt(&predictions, golds)
}

/// As [`per_class_stats`], where `None` marks an item with no prediction: it counts as a
/// false negative of its gold class and a false positive of nothing.
pub fn per_class_stats_opt<P: AsRef<str>, G: AsRef<str>>(
    predictions: &[Option<P>],
    golds: &[G],
) -> Result<ConfusionStats, MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut stats = ConfusionStats::default();
    for (p, g) in predictions.iter().zip(golds) {
        stats.record(p.as_ref().map(AsRef::as_ref), g.as_ref());
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class scores averaged with weights proportional to class support.
pub fn weighted_metrics(stats: &ConfusionStats) -> Result<WeightedMetrics, MetricsError> {
    let total = stats.total_support();
    if total == 0 {
        return Err(MetricsError::EmptyStats);
    }
    let mut sums = [0.0; 3];
    for c in stats.classes.values() {
        let p = ratio(c.tp, c.tp + c.fp);
        let r = ratio(c.tp, c.tp + c.fn_);
        let w = c.support as f64;
        sums[0] += w * p;
        sums[1] += w * r;
        sums[2] += w * f1(p, r);
    }
    let total = total as f64;
    Ok(WeightedMetrics {
        precision: sums[0] / total,
        recall: sums[1] / total,
        f1: sums[2] / total,
    })
}

/// Precision over predicted pairs, recall over gold pairs.
pub fn pair_metrics(correct: u64, predicted: u64, gold: u64) -> WeightedMetrics {
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, gold);
    WeightedMetrics {
        precision,
        recall,
        f1: f1(precision, recall),
    }
}
