//! Binary confusion matrix and the two reported metrics. Machine is the
//! positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AuthorshipLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no scored samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, pred: AuthorshipLabel, gold: AuthorshipLabel) {
        use AuthorshipLabel::*;
        match (pred, gold) {
            (Machine, Machine) => self.tp += 1,
            (Machine, Human) => self.fp += 1,
            (Human, Machine) => self.fn_ += 1,
            (Human, Human) => self.tn += 1,
        }
    }

    /// The same matrix with Human as the positive class.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

pub fn confusion(
    preds: &[AuthorshipLabel],
    golds: &[AuthorshipLabel],
) -> Result<ConfusionMatrix, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        cm.record(*p, *g);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    match cm.total() {
        0 => Err(MetricError::Empty),
        total => Ok((cm.tp + cm.tn) as f64 / total as f64),
    }
}

/// F1 of the positive class: 2tp / (2tp + fp + fn), which equals 2PR/(P+R)
/// and is 0 whenever P + R = 0.
fn positive_f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Unweighted mean of the Machine and Human F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    if cm.total() == 0 {
        return Err(MetricError::Empty);
    }
    let machine = positive_f1(cm.tp, cm.fp, cm.fn_);
    let human = positive_f1(cm.tn, cm.fn_, cm.fp);
    Ok((machine + human) / 2.0)
}
