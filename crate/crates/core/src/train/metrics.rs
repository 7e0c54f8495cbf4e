use serde::{Deserialize, Serialize};

/// Confusion counts and the derived classification metrics. A metric whose
/// denominator is zero is reported as 0 and flagged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let total = (tp + fp + fn_ + tn) as f64;
        let (accuracy, _) = ratio((tp + tn) as f64, total);
        let (precision, precision_undefined) = ratio(tp as f64, (tp + fp) as f64);
        let (recall, recall_undefined) = ratio(tp as f64, (tp + fn_) as f64);
        let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
        Self {
            tp,
            fp,
            fn_,
            tn,
            accuracy,
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }

    /// Counts predictions `score > tau` against labels.
    pub fn from_scores(scores: &[f64], labels: &[bool], tau: f64) -> Self {
        assert_eq!(scores.len(), labels.len(), "one label per score");
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            c.add(s > tau, y);
        }
        c.report()
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Running confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport::from_counts(self.tp, self.fp, self.fn_, self.tn)
    }
}
