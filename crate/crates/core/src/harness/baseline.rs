//! TF-IDF features + multinomial logistic regression, trained on the same
//! labelled documents as the graph model.

use ndarray::{Array1, Array2, Axis};

use super::config::{BaselineConfig, ExperimentConfig};
use super::pipeline::{fingerprint, load_corpus_stage};
use super::report::RunReport;
use super::HarnessError;
use crate::corpus::{Corpus, SplitAssignment};
use crate::graph::{tfidf, TfidfVariant};
use crate::io::{write_atomic, write_json};
use crate::model::ModelError;
use crate::sparse::SparseMatrix;

/// `K × U` smoothed TF-IDF document vectors, each scaled to unit L2 norm.
pub fn tfidf_features(corpus: &Corpus) -> SparseMatrix<f64> {
    let docs = tfidf::<f64>(corpus, TfidfVariant::Smoothed).transpose();
    let norms: Vec<f64> = (0..docs.n_rows()).map(|d| docs.row(d).map(|(_, v)| v * v).sum::<f64>().sqrt()).collect();
    let trip = docs.triplets().map(|(d, w, v)| (d, w, v / norms[d])).collect();
    SparseMatrix::from_triplets(docs.n_rows(), docs.n_cols(), trip)
}

fn rows_of(x: &SparseMatrix<f64>, ids: &[usize]) -> SparseMatrix<f64> {
    let trip = ids.iter().enumerate().flat_map(|(r, &d)| x.row(d).map(move |(w, v)| (r, w, v))).collect();
    SparseMatrix::from_triplets(ids.len(), x.n_cols(), trip)
}

fn logits(x: &SparseMatrix<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.matmul_dense(w.view()) + b
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Full-batch gradient descent on mean cross-entropy plus `l2/2 · ‖W‖²`
/// (bias unregularized), from zero weights.
pub fn baseline_tfidf_lr(corpus: &Corpus, splits: &SplitAssignment, cfg: &BaselineConfig) -> Result<RunReport, HarnessError> {
    let labelled: Vec<(usize, usize)> = splits.train_ids.iter().filter_map(|&d| corpus.docs[d].label.map(|c| (d, c))).collect();
    if labelled.is_empty() {
        return Err(HarnessError::stage("baseline", ModelError::EmptyMask));
    }
    let features = tfidf_features(corpus);
    let ids: Vec<usize> = labelled.iter().map(|&(d, _)| d).collect();
    let x = rows_of(&features, &ids);
    let (u, c, n) = (corpus.n_words(), corpus.n_classes(), labelled.len() as f64);
    let mut w = Array2::<f64>::zeros((u, c));
    let mut b = Array1::<f64>::zeros(c);
    for _ in 0..cfg.epochs {
        let mut p = logits(&x, &w, &b);
        softmax_rows(&mut p);
        for (r, &(_, class)) in labelled.iter().enumerate() {
            p[[r, class]] -= 1.0;
        }
        p /= n;
        let gw = x.transpose_matmul_dense(p.view()) + &w * cfg.l2;
        let gb = p.sum_axis(Axis(0));
        w.scaled_add(-cfg.lr, &gw);
        b.scaled_add(-cfg.lr, &gb);
    }
    let scores = logits(&features, &w, &b);
    let predicted: Vec<usize> = scores
        .rows()
        .into_iter()
        .map(|row| row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best }))
        .collect();
    let mut report = RunReport::from_predictions("tfidf-lr", corpus, splits, &predicted);
    report.parameter_count = u * c + c;
    report.settings = serde_json::to_value(cfg).expect("baseline settings serialize");
    Ok(report)
}

/// Baseline on the prepared corpus of `run.out`; writes `baseline.json` and `baseline.txt` there.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let cfg = cfg.resolved()?;
    let (corpus, splits, corpus_fp) = load_corpus_stage(&cfg)?;
    let mut report = baseline_tfidf_lr(&corpus, &splits, &cfg.run.baseline)?;
    report.dataset = cfg.dataset_name();
    report.seed = cfg.run.seed;
    report.fingerprint =
        fingerprint(&[b"baseline", corpus_fp.as_bytes(), &serde_json::to_vec(&cfg.run.baseline).expect("settings serialize")]);
    let json = cfg.run.out.join("baseline.json");
    write_json(&json, &report).map_err(|e| HarnessError::io(&json, e))?;
    let txt = cfg.run.out.join("baseline.txt");
    write_atomic(&txt, report.to_string().as_bytes()).map_err(|e| HarnessError::io(&txt, e))?;
    Ok(report)
}
