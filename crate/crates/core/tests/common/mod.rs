#![allow(dead_code)]

use megcn::graph::MultiEdgeGraph;
use megcn::model::{backward, forward, softmax_xent_with_grad, Dropout, ModelParams, Pooling, StreamMode, TrainConfig};
use megcn::sparse::{normalize, SparseMatrix};
use ndarray::Array2;
use rand::Rng;

/// Random symmetric weighted adjacency (no self-loops), edge probability `p`.
pub fn random_symmetric(rng: &mut impl Rng, n: usize, p: f64) -> SparseMatrix<f64> {
    let mut trip = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                let w = rng.gen_range(0.05..1.0);
                trip.push((i, j, w));
                trip.push((j, i, w));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, trip)
}

/// `n` nodes, `t` edge dimensions, `t` input features per node.
pub fn random_graph(rng: &mut impl Rng, n: usize, t: usize) -> MultiEdgeGraph<f64> {
    let normalized = (0..t).map(|_| normalize(&random_symmetric(rng, n, 0.5))).collect();
    let feats = Array2::from_shape_simple_fn((n, t), || rng.gen_range(-1.0..1.0));
    MultiEdgeGraph::from_normalized(normalized, feats).unwrap()
}

pub fn small_config(t: usize, d_ms: usize, pooling: Pooling, mode: StreamMode, seed: u64) -> TrainConfig {
    TrainConfig { streams: t, hidden_per_stream: d_ms, pooling, mode, seed, ..TrainConfig::default() }
}

/// At least one labelled node, random classes.
pub fn random_targets(rng: &mut impl Rng, n: usize, c: usize) -> Vec<(usize, usize)> {
    let mut targets = Vec::new();
    for i in 0..n {
        if rng.gen_bool(0.6) {
            targets.push((i, rng.gen_range(0..c)));
        }
    }
    if targets.is_empty() {
        targets.push((0, rng.gen_range(0..c)));
    }
    targets
}

pub fn loss_with_masks(
    g: &MultiEdgeGraph<f64>,
    p: &ModelParams<f64>,
    cfg: &TrainConfig,
    masks: &[Option<Array2<f64>>],
    targets: &[(usize, usize)],
) -> f64 {
    let pass = forward(g, p, cfg, Dropout::Masks(masks)).unwrap();
    softmax_xent_with_grad(&pass.logits, targets).unwrap().0
}

pub fn analytic_grads(
    g: &MultiEdgeGraph<f64>,
    p: &ModelParams<f64>,
    cfg: &TrainConfig,
    masks: &[Option<Array2<f64>>],
    targets: &[(usize, usize)],
) -> ModelParams<f64> {
    let pass = forward(g, p, cfg, Dropout::Masks(masks)).unwrap();
    let (_, dlogits) = softmax_xent_with_grad(&pass.logits, targets).unwrap();
    backward(g, p, cfg, &pass, &dlogits).unwrap()
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exact zeros (dead units)
/// from turning round-off into a unit relative error.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error between backward() and central differences over
/// every weight.
pub fn max_fd_error(
    g: &MultiEdgeGraph<f64>,
    p: &ModelParams<f64>,
    cfg: &TrainConfig,
    masks: &[Option<Array2<f64>>],
    targets: &[(usize, usize)],
    h: f64,
) -> f64 {
    let grads = analytic_grads(g, p, cfg, masks, targets);
    let mut worst = 0.0_f64;
    for l in 0..p.layers.len() {
        for s in 0..p.layers[l].len() {
            for idx in ndarray::indices(p.layers[l][s].raw_dim()) {
                let mut plus = p.clone();
                plus.layers[l][s][idx] += h;
                let mut minus = p.clone();
                minus.layers[l][s][idx] -= h;
                let numeric =
                    (loss_with_masks(g, &plus, cfg, masks, targets) - loss_with_masks(g, &minus, cfg, masks, targets)) / (2.0 * h);
                worst = worst.max(rel_error(grads.layers[l][s][idx], numeric));
            }
        }
    }
    worst
}

/// Dropout masks drawn once, for reuse across perturbed evaluations.
pub fn sample_masks(g: &MultiEdgeGraph<f64>, p: &ModelParams<f64>, cfg: &TrainConfig, rate: f64, rng: &mut dyn rand::RngCore) -> Vec<Option<Array2<f64>>> {
    forward(g, p, cfg, Dropout::Sample { rate, rng }).unwrap().masks
}
