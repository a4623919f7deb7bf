mod common;

use common::*;
use megcn::graph::MultiEdgeGraph;
use megcn::model::{forward, Dropout, ModelParams, Pooling, StreamMode};
use megcn::sparse::SparseMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POOLINGS: [Pooling; 3] = [Pooling::Max, Pooling::Avg, Pooling::Min];
const MODES: [StreamMode; 2] = [StreamMode::Separated, StreamMode::Shared];

#[test]
fn backward_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..24 {
        let (n, t, c) = (rng.gen_range(3..=10), rng.gen_range(1..=4), rng.gen_range(2..=3));
        let g = random_graph(&mut rng, n, t);
        let targets = random_targets(&mut rng, n, c);
        for pooling in POOLINGS {
            for mode in MODES {
                let mut cfg = small_config(t, rng.gen_range(1..=3), pooling, mode, case);
                cfg.hidden_layers = 1 + case as usize % 2;
                let p = ModelParams::<f64>::init(&cfg, t, c);
                let masks = sample_masks(&g, &p, &cfg, 0.3, &mut rng);
                let err = max_fd_error(&g, &p, &cfg, &masks, &targets, 1e-5);
                assert!(err < 1e-4, "case {case} {pooling:?} {mode:?}: relative error {err:e}");
            }
        }
    }
}

#[test]
fn shared_gradient_is_sum_of_identical_separated_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..10 {
        let (n, t) = (rng.gen_range(3..=8), rng.gen_range(2..=4));
        let g = random_graph(&mut rng, n, t);
        let targets = random_targets(&mut rng, n, 2);
        for pooling in POOLINGS {
            let shared_cfg = small_config(t, 2, pooling, StreamMode::Shared, case);
            let shared = ModelParams::<f64>::init(&shared_cfg, t, 2);
            let sep_cfg = small_config(t, 2, pooling, StreamMode::Separated, case);
            let separated = ModelParams {
                mode: StreamMode::Separated,
                streams: t,
                layers: shared.layers.iter().map(|l| vec![l[0].clone(); t]).collect(),
            };
            let masks = sample_masks(&g, &shared, &shared_cfg, 0.5, &mut rng);
            let gs = analytic_grads(&g, &shared, &shared_cfg, &masks, &targets);
            let gp = analytic_grads(&g, &separated, &sep_cfg, &masks, &targets);
            for (l, layer) in gp.layers.iter().enumerate() {
                let mut sum = Array2::<f64>::zeros(layer[0].raw_dim());
                for w in layer {
                    sum += w;
                }
                let diff = (&sum - &gs.layers[l][0]).mapv(f64::abs).fold(0.0_f64, |a, &b| a.max(b));
                assert!(diff < 1e-12, "layer {l} {pooling:?}: {diff:e}");
            }
        }
    }
}

#[test]
fn single_stream_modes_coincide() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 7, 1);
    let targets = random_targets(&mut rng, 7, 3);
    for pooling in POOLINGS {
        let a_cfg = small_config(1, 3, pooling, StreamMode::Separated, 1);
        let b_cfg = small_config(1, 3, pooling, StreamMode::Shared, 1);
        let a = ModelParams::<f64>::init(&a_cfg, 1, 3);
        let mut b = a.clone();
        b.mode = StreamMode::Shared;
        let fa = forward(&g, &a, &a_cfg, Dropout::Off).unwrap();
        let fb = forward(&g, &b, &b_cfg, Dropout::Off).unwrap();
        assert_eq!(fa.logits, fb.logits);
        let none = [None, None];
        assert_eq!(analytic_grads(&g, &a, &a_cfg, &none, &targets).layers, analytic_grads(&g, &b, &b_cfg, &none, &targets).layers);
    }
}

#[test]
fn relabelling_nodes_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..10 {
        let (n, t) = (rng.gen_range(3..=10), rng.gen_range(1..=4));
        let g = random_graph(&mut rng, n, t);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let gp: MultiEdgeGraph<f64> = g.permuted(&perm);
        for pooling in POOLINGS {
            for mode in MODES {
                let cfg = small_config(t, 2, pooling, mode, case);
                let p = ModelParams::<f64>::init(&cfg, t, 3);
                let a = forward(&g, &p, &cfg, Dropout::Off).unwrap().logits;
                let b = forward(&gp, &p, &cfg, Dropout::Off).unwrap().logits;
                for i in 0..n {
                    for k in 0..3 {
                        assert!((a[[i, k]] - b[[perm[i], k]]).abs() < 1e-12, "case {case} node {i}");
                    }
                }
            }
        }
    }
}

#[test]
fn isolated_nodes_use_only_their_own_features() {
    let n = 4;
    let eye = SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect());
    let feats = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64 * 0.1);
    let g = MultiEdgeGraph::from_normalized(vec![eye.clone(), eye], feats.clone()).unwrap();
    let cfg = small_config(2, 2, Pooling::Avg, StreamMode::Separated, 3);
    let p = ModelParams::<f64>::init(&cfg, 2, 2);
    let logits = forward(&g, &p, &cfg, Dropout::Off).unwrap().logits;
    // a one-node graph with the same features gives the same row
    for i in 0..n {
        let one = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 1.0)]);
        let gi = MultiEdgeGraph::from_normalized(vec![one.clone(), one], feats.slice(ndarray::s![i..i + 1, ..]).to_owned()).unwrap();
        let li = forward(&gi, &p, &cfg, Dropout::Off).unwrap().logits;
        assert_eq!(li.row(0), logits.row(i));
    }
}
