//! Run reports: accuracy, per-class precision/recall, confusion matrix.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SplitAssignment};
use crate::model::{StopReason, TrainHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    /// Test documents of this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_accuracy: f64,
    pub stop_reason: StopReason,
}

impl From<&TrainHistory> for HistorySummary {
    fn from(h: &TrainHistory) -> Self {
        HistorySummary {
            epochs_run: h.epochs_run(),
            best_epoch: h.best_epoch,
            best_val_loss: h.best_val_loss(),
            best_val_accuracy: h.val_accuracy[h.best_epoch - 1],
            stop_reason: h.stop_reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    /// SHA-256 over the resolved configuration, dataset content and seed.
    pub fingerprint: String,
    pub n_words: usize,
    pub n_docs: usize,
    pub class_names: Vec<String>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Test confusion counts; rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub history: Option<HistorySummary>,
    pub parameter_count: usize,
    /// Reference accuracy of the matching dataset preset, for comparison only.
    pub reference_accuracy: Option<f64>,
    /// Method-specific settings worth recording (e.g. baseline optimizer values).
    pub settings: serde_json::Value,
    /// Wall-clock seconds per stage. Kept out of the JSON report so reruns compare byte-for-byte.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    /// Metrics from one predicted class per document. Identification fields
    /// (`dataset`, `fingerprint`, `history`, ...) are left for the caller.
    pub fn from_predictions(method: &str, corpus: &Corpus, splits: &SplitAssignment, predicted: &[usize]) -> Self {
        let pairs = |ids: &[usize]| -> Vec<(usize, usize)> {
            ids.iter().filter_map(|&d| corpus.docs[d].label.map(|t| (t, predicted[d]))).collect()
        };
        let test = pairs(&splits.test_ids);
        let confusion = confusion_matrix(&test, corpus.n_classes());
        RunReport {
            method: method.to_owned(),
            dataset: String::new(),
            seed: splits.seed,
            fingerprint: String::new(),
            n_words: corpus.n_words(),
            n_docs: corpus.n_docs(),
            class_names: corpus.class_names.clone(),
            train_accuracy: accuracy(&pairs(&splits.train_ids)),
            val_accuracy: accuracy(&pairs(&splits.val_ids)),
            test_accuracy: accuracy(&test),
            per_class: class_metrics(&confusion, &corpus.class_names),
            confusion,
            history: None,
            parameter_count: 0,
            reference_accuracy: None,
            settings: serde_json::Value::Null,
            timings: Vec::new(),
        }
    }
}

/// Fraction of `(truth, predicted)` pairs that agree; 0 for an empty set.
pub fn accuracy(pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64
}

pub fn confusion_matrix(pairs: &[(usize, usize)], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for &(t, p) in pairs {
        m[t][p] += 1;
    }
    m
}

pub fn class_metrics(confusion: &[Vec<usize>], class_names: &[String]) -> Vec<ClassMetrics> {
    let n = confusion.len();
    (0..n)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..n).map(|r| confusion[r][c]).sum();
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            ClassMetrics { class: class_names[c].clone(), precision: ratio(tp, predicted), recall: ratio(tp, support), support }
        })
        .collect()
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method       {}", self.method)?;
        writeln!(f, "dataset      {} (U={}, K={}, C={})", self.dataset, self.n_words, self.n_docs, self.class_names.len())?;
        writeln!(f, "seed         {}", self.seed)?;
        writeln!(f, "fingerprint  {}", self.fingerprint)?;
        writeln!(f, "parameters   {}", self.parameter_count)?;
        writeln!(f, "accuracy     train {:.4}  val {:.4}  test {:.4}", self.train_accuracy, self.val_accuracy, self.test_accuracy)?;
        if let Some(r) = self.reference_accuracy {
            writeln!(f, "reference    {r:.4} (full-dataset reference; delta {:+.4})", self.test_accuracy - r)?;
        }
        if let Some(h) = &self.history {
            writeln!(
                f,
                "training     {} epochs, best epoch {} (val loss {:.6}, val acc {:.4}), stopped by {:?}",
                h.epochs_run, h.best_epoch, h.best_val_loss, h.best_val_accuracy, h.stop_reason
            )?;
        }
        writeln!(f, "\n{:<20} {:>9} {:>9} {:>8}", "class", "precision", "recall", "support")?;
        for m in &self.per_class {
            writeln!(f, "{:<20} {:>9.4} {:>9.4} {:>8}", m.class, m.precision, m.recall, m.support)?;
        }
        writeln!(f, "\nconfusion (rows true, columns predicted)")?;
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
            writeln!(f, "{}", cells.join(""))?;
        }
        if !self.timings.is_empty() {
            writeln!(f, "\nstage timings")?;
            for (stage, secs) in &self.timings {
                writeln!(f, "  {stage:<10} {secs:>9.3}s")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_arithmetic() {
        let pairs = [(0, 0), (0, 1), (1, 1), (1, 1), (2, 0)];
        let m = confusion_matrix(&pairs, 3);
        assert_eq!(m, vec![vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 0]]);
        let trace: usize = (0..3).map(|i| m[i][i]).sum();
        assert_eq!(accuracy(&pairs), trace as f64 / 5.0);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let cm = class_metrics(&m, &names);
        assert_eq!(cm[0].support, 2);
        assert_eq!(cm[1].precision, 2.0 / 3.0);
        assert_eq!(cm[2].precision, 0.0);
        assert_eq!(accuracy(&[]), 0.0);
    }
}
