//! Full-batch training with early stopping, prediction and checkpoints.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{backward, forward, softmax_xent_with_grad, Dropout};
use super::{adam_step, AdamState, ModelError, ModelParams, TrainConfig};
use crate::graph::MultiEdgeGraph;
use crate::scalar::Scalar;

/// Supervision as `(node, class)` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Targets {
    pub train: Vec<(usize, usize)>,
    /// Monitored for early stopping; when empty the no-dropout training loss is monitored instead.
    pub val: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }
}

/// Tracks the minimum monitored loss and counts epochs since it last improved.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    /// Records `loss` for `epoch`; returns `true` when it is a new minimum.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Parameters from the best monitored epoch.
    pub params: ModelParams<F>,
    /// Optimizer state at the best epoch.
    pub adam: AdamState<F>,
    pub history: TrainHistory,
}

fn accuracy<F: Scalar>(logits: &Array2<F>, targets: &[(usize, usize)]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let hits = targets.iter().filter(|&&(n, c)| argmax(logits.row(n)) == c).count();
    hits as f64 / targets.len() as f64
}

fn argmax<F: Scalar>(row: ndarray::ArrayView1<'_, F>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains on the whole graph at once. Each epoch takes one Adam step on the
/// dropout-perturbed training loss, then evaluates the monitored loss
/// without dropout. Stops after `patience` epochs without a new minimum.
pub fn train<F: Scalar>(
    graph: &MultiEdgeGraph<F>,
    targets: &Targets,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<F>, ModelError> {
    cfg.validate()?;
    if targets.train.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    if let Some(&(n, c)) = targets.train.iter().chain(&targets.val).find(|&&(n, c)| n >= graph.n_nodes() || c >= n_classes) {
        return Err(ModelError::ShapeMismatch(format!("target ({n}, {c}) outside {} nodes / {n_classes} classes", graph.n_nodes())));
    }
    let mut params = ModelParams::<F>::init(cfg, graph.node_features.ncols(), n_classes);
    let mut adam = AdamState::new(&params);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD50F_D50F_D50F_D50F);
    let monitored = if targets.val.is_empty() { &targets.train } else { &targets.val };

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = (params.clone(), adam.clone());

    for epoch in 1..=cfg.max_epochs {
        let pass = forward(graph, &params, cfg, Dropout::Sample { rate: cfg.dropout, rng: &mut dropout_rng })?;
        let (loss, dlogits) = softmax_xent_with_grad(&pass.logits, &targets.train)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(ModelError::Divergence { epoch, loss });
        }
        let grads = backward(graph, &params, cfg, &pass, &dlogits)?;
        adam_step(&mut params, &grads, &mut adam, cfg.lr, &cfg.adam);

        let eval = forward(graph, &params, cfg, Dropout::Off)?;
        let (val_loss, _) = softmax_xent_with_grad(&eval.logits, monitored)?;
        let val_loss = val_loss.as_f64();
        if !val_loss.is_finite() {
            return Err(ModelError::Divergence { epoch, loss: val_loss });
        }
        history.train_loss.push(loss);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(accuracy(&eval.logits, monitored));
        log::debug!("epoch {epoch}: train loss {loss:.6}, val loss {val_loss:.6}");

        if stopper.observe(epoch, val_loss) {
            best = (params.clone(), adam.clone());
        }
        if stopper.should_stop() {
            history.stop_reason = StopReason::Patience;
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    let (params, adam) = best;
    Ok(TrainOutcome { params, adam, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub node: usize,
    pub class: usize,
    pub probabilities: Vec<f64>,
}

/// Softmax class probabilities and argmax (lowest class on ties), without dropout.
pub fn predict<F: Scalar>(
    graph: &MultiEdgeGraph<F>,
    params: &ModelParams<F>,
    cfg: &TrainConfig,
    nodes: &[usize],
) -> Result<Vec<Prediction>, ModelError> {
    let pass = forward(graph, params, cfg, Dropout::Off)?;
    Ok(nodes.iter().map(|&n| predict_row(n, pass.logits.row(n))).collect())
}

pub(crate) fn predict_row<F: Scalar>(node: usize, row: ndarray::ArrayView1<'_, F>) -> Prediction {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let exp: Vec<f64> = row.iter().map(|&v| (v - max).as_f64().exp()).collect();
    let z: f64 = exp.iter().sum();
    Prediction { node, class: argmax(row), probabilities: exp.into_iter().map(|e| e / z).collect() }
}

/// Persisted training result; JSON round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<F> {
    pub precision: String,
    pub config: TrainConfig,
    pub n_classes: usize,
    pub params: ModelParams<F>,
    pub adam: AdamState<F>,
    pub best_epoch: usize,
    pub history: TrainHistory,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn new(config: TrainConfig, n_classes: usize, outcome: TrainOutcome<F>) -> Self {
        Checkpoint {
            precision: F::NAME.to_owned(),
            config,
            n_classes,
            best_epoch: outcome.history.best_epoch,
            params: outcome.params,
            adam: outcome.adam,
            history: outcome.history,
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let ck: Self = crate::io::read_json(path)?;
        if ck.precision != F::NAME {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("checkpoint precision {} does not match {}", ck.precision, F::NAME),
            ));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn early_stopping_counts_stale_epochs() {
        let mut s = EarlyStopping::new(3);
        assert!(s.observe(1, 1.0));
        assert!(!s.observe(2, 1.0));
        assert!(!s.observe(3, 1.5));
        assert!(!s.should_stop());
        assert!(!s.observe(4, 2.0));
        assert!(s.should_stop());
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn prediction_ties_and_probabilities() {
        let p = predict_row(0, array![0.1_f64, 0.9].view());
        assert_eq!(p.class, 1);
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(predict_row(0, array![0.4_f64, 0.4].view()).class, 0);
    }
}
