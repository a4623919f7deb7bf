//! Forward and reverse passes of the multi-stream network.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{Activation, ModelError, ModelParams, Pooling, TrainConfig};
use crate::graph::MultiEdgeGraph;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// Dropout applied to each layer's input. One mask per layer, shared by all
/// streams of that layer. Masks hold `0` or `1 / (1 - rate)`.
pub enum Dropout<'a, F> {
    Off,
    Sample { rate: f64, rng: &'a mut dyn rand::RngCore },
    Masks(&'a [Option<Array2<F>>]),
}

fn sample_mask<F: Scalar>(shape: (usize, usize), rate: f64, rng: &mut dyn rand::RngCore) -> Array2<F> {
    let keep = F::lit(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < rate { F::zero() } else { keep })
}

fn stream_preactivations<F: Scalar>(
    input: ArrayView2<'_, F>,
    normalized: &[SparseMatrix<F>],
    weights: &[Array2<F>],
) -> Result<Vec<Array2<F>>, ModelError> {
    let streams = normalized.len();
    if weights.len() != streams && weights.len() != 1 {
        return Err(ModelError::ShapeMismatch(format!("{} weight matrices for {streams} streams", weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| w.nrows() != input.ncols()) {
        return Err(ModelError::ShapeMismatch(format!("input width {} vs weight rows {}", input.ncols(), w.nrows())));
    }
    if let Some(a) = normalized.iter().find(|a| a.n_cols() != input.nrows()) {
        return Err(ModelError::ShapeMismatch(format!("graph {}x{} vs {} input rows", a.n_rows(), a.n_cols(), input.nrows())));
    }
    let width = weights[0].ncols();
    if weights.iter().any(|w| w.ncols() != width) {
        return Err(ModelError::ShapeMismatch("stream weights differ in width".into()));
    }
    // one product for all streams: H · [W(1) … W(T)]
    let projected = if weights.len() == 1 { input.dot(&weights[0]) } else { input.dot(&concat_weights(weights)) };
    Ok(normalized
        .iter()
        .enumerate()
        .map(|(t, a)| {
            let c = if weights.len() == 1 { 0 } else { t * width };
            a.matmul_dense(projected.slice(s![.., c..c + width]))
        })
        .collect())
}

fn concat_weights<F: Scalar>(weights: &[Array2<F>]) -> Array2<F> {
    let views: Vec<ArrayView2<'_, F>> = weights.iter().map(|w| w.view()).collect();
    concatenate(Axis(1), &views).expect("equal row counts checked by caller")
}

/// `σ(Â(t) · drop(H) · W(t))` for every stream `t`.
///
/// `weights` holds one matrix per stream, or a single matrix shared by all.
/// `activation = None` leaves the outputs linear (used at the output layer).
pub fn ms_layer_forward<F: Scalar>(
    input: ArrayView2<'_, F>,
    normalized: &[SparseMatrix<F>],
    weights: &[Array2<F>],
    activation: Option<Activation>,
    dropout_mask: Option<&Array2<F>>,
) -> Result<Vec<Array2<F>>, ModelError> {
    let mut out = match dropout_mask {
        Some(mask) => stream_preactivations((&input * mask).view(), normalized, weights)?,
        None => stream_preactivations(input, normalized, weights)?,
    };
    if let Some(act) = activation {
        out.iter_mut().for_each(|z| z.mapv_inplace(|v| act.apply(v)));
    }
    Ok(out)
}

fn check_same_shape<F>(streams: &[Array2<F>]) -> Result<(), ModelError> {
    let first = streams.first().ok_or_else(|| ModelError::ShapeMismatch("no streams".into()))?;
    if streams.iter().any(|s| s.dim() != first.dim()) {
        return Err(ModelError::ShapeMismatch("stream outputs differ in shape".into()));
    }
    Ok(())
}

/// Column-wise concatenation in stream order.
pub fn concat_streams<F: Scalar>(streams: &[Array2<F>]) -> Result<Array2<F>, ModelError> {
    check_same_shape(streams)?;
    let views: Vec<ArrayView2<'_, F>> = streams.iter().map(|s| s.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| ModelError::ShapeMismatch(e.to_string()))
}

/// Pooled values plus, for max/min, the stream selected per element
/// (lowest index on ties).
fn pool_with_selection<F: Scalar>(streams: &[Array2<F>], method: Pooling) -> Result<(Array2<F>, Option<Array2<usize>>), ModelError> {
    check_same_shape(streams)?;
    let mut pooled = streams[0].clone();
    match method {
        Pooling::Avg => {
            for s in &streams[1..] {
                pooled += s;
            }
            let t = F::lit(streams.len() as f64);
            pooled.mapv_inplace(|v| v / t);
            Ok((pooled, None))
        }
        Pooling::Max | Pooling::Min => {
            let mut sel = Array2::zeros(pooled.raw_dim());
            for (t, s) in streams.iter().enumerate().skip(1) {
                Zip::from(&mut pooled).and(&mut sel).and(s).for_each(|p, idx, &v| {
                    let better = if method == Pooling::Max { v > *p } else { v < *p };
                    if better {
                        *p = v;
                        *idx = t;
                    }
                });
            }
            Ok((pooled, Some(sel)))
        }
    }
}

/// Elementwise max / mean / min across stream outputs.
pub fn pool_streams<F: Scalar>(streams: &[Array2<F>], method: Pooling) -> Result<Array2<F>, ModelError> {
    pool_with_selection(streams, method).map(|(p, _)| p)
}

fn log_softmax_row<F: Scalar>(row: ndarray::ArrayView1<'_, F>) -> Vec<F> {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
    row.iter().map(|&v| v - lse).collect()
}

/// Mean cross-entropy over `targets` (`(node, class)` pairs) and its
/// gradient with respect to all logits (zero outside the targets).
pub fn softmax_xent_with_grad<F: Scalar>(logits: &Array2<F>, targets: &[(usize, usize)]) -> Result<(F, Array2<F>), ModelError> {
    if targets.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    let n = F::lit(targets.len() as f64);
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = F::zero();
    for &(node, class) in targets {
        if node >= logits.nrows() || class >= logits.ncols() {
            return Err(ModelError::ShapeMismatch(format!("target ({node}, {class}) outside logits {:?}", logits.dim())));
        }
        let logp = log_softmax_row(logits.row(node));
        loss -= logp[class];
        for (c, lp) in logp.into_iter().enumerate() {
            let indicator = if c == class { F::one() } else { F::zero() };
            grad[[node, c]] += (lp.exp() - indicator) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean of `-log softmax(logits)[label]` over the nodes in `mask`.
pub fn masked_softmax_xent<F: Scalar>(logits: &Array2<F>, labels: &[Option<usize>], mask: &[usize]) -> Result<F, ModelError> {
    let targets: Vec<(usize, usize)> = mask
        .iter()
        .map(|&node| labels.get(node).copied().flatten().map(|c| (node, c)).ok_or(ModelError::UnlabelledNode { node }))
        .collect::<Result<_, _>>()?;
    softmax_xent_with_grad(logits, &targets).map(|(l, _)| l)
}

/// Everything the reverse pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<F> {
    /// Input to each layer after dropout.
    pub layer_inputs: Vec<Array2<F>>,
    pub masks: Vec<Option<Array2<F>>>,
    /// Pre-activations of every hidden layer, per stream.
    pub hidden_pre: Vec<Vec<Array2<F>>>,
    /// Output-layer stream values before pooling.
    pub output_streams: Vec<Array2<F>>,
    selection: Option<Array2<usize>>,
    /// Pooled, pre-softmax outputs (`N × C`).
    pub logits: Array2<F>,
}

impl<F: Scalar> ForwardPass<F> {
    /// Concatenated activations of the last hidden layer (no dropout applied).
    pub fn last_hidden(&self, activation: Activation) -> Option<Array2<F>> {
        let pre = self.hidden_pre.last()?;
        let act: Vec<Array2<F>> = pre.iter().map(|z| z.mapv(|v| activation.apply(v))).collect();
        concat_streams(&act).ok()
    }
}

fn check_model<F: Scalar>(graph: &MultiEdgeGraph<F>, params: &ModelParams<F>, cfg: &TrainConfig) -> Result<(), ModelError> {
    if graph.normalized.len() != cfg.streams || params.streams != cfg.streams {
        return Err(ModelError::ShapeMismatch(format!(
            "graph has {} edge dimensions, params {} streams, config {} streams",
            graph.normalized.len(),
            params.streams,
            cfg.streams
        )));
    }
    if params.layers.len() != cfg.hidden_layers + 1 {
        return Err(ModelError::ShapeMismatch(format!("params have {} layers, config {}", params.layers.len(), cfg.hidden_layers + 1)));
    }
    Ok(())
}

pub fn forward<F: Scalar>(
    graph: &MultiEdgeGraph<F>,
    params: &ModelParams<F>,
    cfg: &TrainConfig,
    mut dropout: Dropout<'_, F>,
) -> Result<ForwardPass<F>, ModelError> {
    check_model(graph, params, cfg)?;
    let n_layers = params.layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut masks = Vec::with_capacity(n_layers);
    let mut hidden_pre = Vec::with_capacity(n_layers - 1);
    let mut x = graph.node_features.clone();
    for l in 0..n_layers {
        let mask = match &mut dropout {
            Dropout::Off => None,
            Dropout::Sample { rate, .. } if *rate == 0.0 => None,
            Dropout::Sample { rate, rng } => Some(sample_mask(x.dim(), *rate, &mut **rng)),
            Dropout::Masks(m) => m.get(l).cloned().flatten(),
        };
        if let Some(m) = &mask {
            if m.dim() != x.dim() {
                return Err(ModelError::ShapeMismatch(format!("dropout mask {:?} vs layer input {:?}", m.dim(), x.dim())));
            }
            x *= m;
        }
        let z = stream_preactivations(x.view(), &graph.normalized, &params.layers[l])?;
        layer_inputs.push(x);
        masks.push(mask);
        if l + 1 < n_layers {
            let act: Vec<Array2<F>> = z.iter().map(|z| z.mapv(|v| cfg.activation.apply(v))).collect();
            x = concat_streams(&act)?;
            hidden_pre.push(z);
        } else {
            let (logits, selection) = pool_with_selection(&z, cfg.pooling)?;
            return Ok(ForwardPass { layer_inputs, masks, hidden_pre, output_streams: z, selection, logits });
        }
    }
    unreachable!("loop returns at the output layer")
}

/// Gradients of the loss with respect to every weight, given `dL/dlogits`.
pub fn backward<F: Scalar>(
    graph: &MultiEdgeGraph<F>,
    params: &ModelParams<F>,
    cfg: &TrainConfig,
    pass: &ForwardPass<F>,
    dlogits: &Array2<F>,
) -> Result<ModelParams<F>, ModelError> {
    check_model(graph, params, cfg)?;
    let streams = cfg.streams;
    let mut grads = params.zeros_like();

    // route the pooled gradient back to the streams
    let mut upstream: Vec<Array2<F>> = match (&pass.selection, cfg.pooling) {
        (None, _) => {
            let share = F::one() / F::lit(streams as f64);
            vec![dlogits.mapv(|g| g * share); streams]
        }
        (Some(sel), _) => (0..streams)
            .map(|t| {
                let mut g = Array2::zeros(dlogits.raw_dim());
                Zip::from(&mut g).and(dlogits).and(sel).for_each(|g, &d, &s| {
                    if s == t {
                        *g = d;
                    }
                });
                g
            })
            .collect(),
    };

    for l in (0..params.layers.len()).rev() {
        let x = &pass.layer_inputs[l];
        // Z(t) = Â(t) X W(t)  ⇒  dW(t) = Xᵀ G(t),  dX = Σ_t G(t) W(t)ᵀ  with  G(t) = Â(t)ᵀ dZ(t)
        let g: Vec<Array2<F>> = upstream.iter().enumerate().map(|(t, dz)| graph.normalized[t].transpose_matmul_dense(dz.view())).collect();
        let weights = &params.layers[l];
        let dx = if weights.len() == 1 {
            let mut sum = g[0].clone();
            for gt in &g[1..] {
                sum += gt;
            }
            grads.layers[l][0] = x.t().dot(&sum);
            (l > 0).then(|| sum.dot(&weights[0].t()))
        } else {
            let width = weights[0].ncols();
            let gcat = concat_streams(&g)?;
            let gw = x.t().dot(&gcat);
            for (t, dw) in grads.layers[l].iter_mut().enumerate() {
                dw.assign(&gw.slice(s![.., t * width..(t + 1) * width]));
            }
            (l > 0).then(|| gcat.dot(&concat_weights(weights).t()))
        };
        let Some(mut dx) = dx else { break };
        if let Some(mask) = &pass.masks[l] {
            dx *= mask;
        }
        let width = cfg.hidden_per_stream;
        upstream = pass.hidden_pre[l - 1]
            .iter()
            .enumerate()
            .map(|(t, z)| {
                let mut d = dx.slice(s![.., t * width..(t + 1) * width]).to_owned();
                Zip::from(&mut d).and(z).for_each(|d, &z| *d *= cfg.activation.derivative(z));
                d
            })
            .collect();
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn half_graph() -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(2, 2, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)])
    }

    #[test]
    fn identity_graph_reduces_to_dense_layer() {
        let eye = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let h = array![[1.0, -2.0], [0.5, 3.0]];
        let w = array![[0.3, -0.1], [0.2, 0.4]];
        let out = ms_layer_forward(h.view(), &[eye], std::slice::from_ref(&w), Some(Activation::Relu), None).unwrap();
        assert_eq!(out[0], h.dot(&w).mapv(|v: f64| v.max(0.0)));
    }

    #[test]
    fn two_node_worked_example() {
        let h = array![[1.0, 0.0], [0.0, 1.0]];
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        let out = ms_layer_forward(h.view(), &[half_graph()], &[w], Some(Activation::Relu), None).unwrap();
        assert_eq!(out[0], array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn zero_weights_zero_output() {
        let h = array![[1.0, 2.0], [3.0, 4.0]];
        let out = ms_layer_forward(h.view(), &[half_graph(), half_graph()], &[Array2::zeros((2, 3))], Some(Activation::Relu), None).unwrap();
        assert!(out.iter().all(|o| o.iter().all(|&v| v == 0.0)));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn layer_shape_errors() {
        let h = array![[1.0, 2.0], [3.0, 4.0]];
        let r = ms_layer_forward(h.view(), &[half_graph()], &[Array2::zeros((3, 1))], None, None);
        assert!(matches!(r, Err(ModelError::ShapeMismatch(_))));
        assert!(concat_streams(&[Array2::<f64>::zeros((2, 1)), Array2::zeros((3, 1))]).is_err());
    }

    #[test]
    fn concat_widths() {
        let a = Array2::<f64>::ones((3, 25));
        assert_eq!(concat_streams(&[a.clone(), a.clone()]).unwrap().ncols(), 50);
        assert_eq!(concat_streams(&vec![a.clone(); 25]).unwrap().ncols(), 625);
        assert_eq!(concat_streams(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn pooling_examples() {
        let s = [array![[0.2_f64, -1.0]], array![[0.5, -2.0]]];
        assert_eq!(pool_streams(&s, Pooling::Max).unwrap(), array![[0.5, -1.0]]);
        let avg = pool_streams(&s, Pooling::Avg).unwrap();
        assert!((avg[[0, 0]] - 0.35).abs() < 1e-15 && (avg[[0, 1]] + 1.5).abs() < 1e-15);
        assert_eq!(pool_streams(&s, Pooling::Min).unwrap(), array![[0.2, -2.0]]);
        let one = [array![[0.7, -0.3]]];
        for m in [Pooling::Max, Pooling::Avg, Pooling::Min] {
            assert_eq!(pool_streams(&one, m).unwrap(), one[0]);
        }
    }

    #[test]
    fn max_pool_ties_select_lowest_stream() {
        let s = [array![[1.0]], array![[1.0]]];
        let (_, sel) = pool_with_selection(&s, Pooling::Max).unwrap();
        assert_eq!(sel.unwrap()[[0, 0]], 0);
    }

    #[test]
    fn cross_entropy_examples() {
        let logits = array![[0.0, 0.0], [100.0, -100.0], [1.0, 2.0]];
        let labels = vec![Some(1), Some(0), Some(0)];
        let l = masked_softmax_xent(&logits, &labels, &[0]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!(masked_softmax_xent(&logits, &labels, &[1]).unwrap() < 1e-80);
        let l2 = masked_softmax_xent(&logits, &labels, &[0, 2]).unwrap();
        let l_node2 = masked_softmax_xent(&logits, &labels, &[2]).unwrap();
        assert!((l2 - (2f64.ln() + l_node2) / 2.0).abs() < 1e-15);
        assert!(matches!(masked_softmax_xent(&logits, &labels, &[]), Err(ModelError::EmptyMask)));
        assert!(matches!(masked_softmax_xent(&logits, &[None, None, None], &[1]), Err(ModelError::UnlabelledNode { node: 1 })));
    }
}
