use megcn::model::{pool_streams, softmax_xent_with_grad, Pooling};
use megcn::sparse::{normalize, SparseMatrix};
use ndarray::Array2;
use proptest::prelude::*;

fn streams_strategy() -> impl Strategy<Value = Vec<Array2<f64>>> {
    (1usize..6, 1usize..5, 1usize..4).prop_flat_map(|(t, n, c)| {
        prop::collection::vec(prop::collection::vec(-1e3..1e3f64, n * c), t)
            .prop_map(move |vs| vs.into_iter().map(|v| Array2::from_shape_vec((n, c), v).unwrap()).collect())
    })
}

proptest! {
    #[test]
    fn max_avg_min_are_ordered(streams in streams_strategy()) {
        let max = pool_streams(&streams, Pooling::Max).unwrap();
        let avg = pool_streams(&streams, Pooling::Avg).unwrap();
        let min = pool_streams(&streams, Pooling::Min).unwrap();
        for ((a, b), c) in max.iter().zip(&avg).zip(&min) {
            prop_assert!(a >= b && b >= c);
        }
    }

    #[test]
    fn softmax_gradient_rows_sum_to_zero(logits in prop::collection::vec(-50.0..50.0f64, 6), class in 0usize..3) {
        let logits = Array2::from_shape_vec((2, 3), logits).unwrap();
        let (loss, grad) = softmax_xent_with_grad(&logits, &[(1, class)]).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(grad.row(0).iter().all(|&g| g == 0.0));
        prop_assert!(grad.row(1).sum().abs() < 1e-12);
    }

    #[test]
    fn normalized_entries_are_bounded(edges in prop::collection::vec((0usize..8, 0usize..8, 0.01..5.0f64), 0..30)) {
        let trip: Vec<_> = edges.iter().filter(|(i, j, _)| i != j).flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)]).collect();
        let a = SparseMatrix::from_triplets(8, 8, trip);
        let s = normalize(&a);
        prop_assert!(s.is_symmetric());
        // all diagonal entries present, values in (0, 1]
        for i in 0..8 {
            prop_assert!(s.get(i, i).is_some());
        }
        prop_assert!(s.values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
