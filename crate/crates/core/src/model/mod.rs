//! Multi-stream GCN: one graph convolution per edge dimension, stream outputs
//! concatenated between layers and pooled at the output layer.

mod adam;
mod layers;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    backward, concat_streams, forward, masked_softmax_xent, ms_layer_forward, pool_streams, softmax_xent_with_grad, Dropout,
    ForwardPass,
};
pub use train::{
    predict, train, Checkpoint, EarlyStopping, Prediction, StopReason, Targets, TrainHistory, TrainOutcome,
};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask is empty")]
    EmptyMask,
    #[error("node {node} in mask has no label")]
    UnlabelledNode { node: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Max,
    Avg,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamMode {
    /// One weight matrix per (layer, stream).
    #[default]
    Separated,
    /// One weight matrix per layer, applied to every stream.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    /// Negative slope 0.01.
    LeakyRelu,
}

impl Activation {
    const LEAKY_SLOPE: f64 = 0.01;

    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => x.max(F::zero()),
            Activation::LeakyRelu if x > F::zero() => x,
            Activation::LeakyRelu => x * F::lit(Self::LEAKY_SLOPE),
        }
    }

    /// Derivative at `x` (taken as the left limit at 0).
    #[inline]
    pub fn derivative<F: Scalar>(self, x: F) -> F {
        match (self, x > F::zero()) {
            (_, true) => F::one(),
            (Activation::Relu, false) => F::zero(),
            (Activation::LeakyRelu, false) => F::lit(Self::LEAKY_SLOPE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of streams `T`; must equal the graph's edge dimensions.
    pub streams: usize,
    /// Per-stream width of each hidden layer (`d_ms`).
    pub hidden_per_stream: usize,
    pub hidden_layers: usize,
    pub pooling: Pooling,
    pub mode: StreamMode,
    pub activation: Activation,
    pub lr: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            streams: 25,
            hidden_per_stream: 25,
            hidden_layers: 1,
            pooling: Pooling::Max,
            mode: StreamMode::Separated,
            activation: Activation::Relu,
            lr: 0.002,
            dropout: 0.5,
            max_epochs: 2000,
            patience: 100,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.streams == 0 {
            return bad("streams must be at least 1".into());
        }
        if self.hidden_per_stream == 0 {
            return bad("hidden_per_stream must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.patience > self.max_epochs {
            return bad(format!("patience {} exceeds max_epochs {}", self.patience, self.max_epochs));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        Ok(())
    }

    /// Input width of every layer and the output width, given `d0` features and `C` classes.
    pub fn layer_shapes(&self, d0: usize, n_classes: usize) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut d_in = d0;
        for _ in 0..self.hidden_layers {
            shapes.push((d_in, self.hidden_per_stream));
            d_in = self.streams * self.hidden_per_stream;
        }
        shapes.push((d_in, n_classes));
        shapes
    }
}

/// Trainable weights: `layers[l][s]` is the matrix of layer `l` for stream
/// `s` (a single entry per layer in shared mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<F> {
    pub mode: StreamMode,
    pub streams: usize,
    pub layers: Vec<Vec<Array2<F>>>,
}

fn sub_seed(seed: u64, layer: usize, stream: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed ^ ((layer as u64) << 32 | stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<F: Scalar> ModelParams<F> {
    /// Glorot-uniform initialization, one sub-seed per (layer, stream).
    pub fn init(cfg: &TrainConfig, d0: usize, n_classes: usize) -> Self {
        let per_layer = match cfg.mode {
            StreamMode::Separated => cfg.streams,
            StreamMode::Shared => 1,
        };
        let layers = cfg
            .layer_shapes(d0, n_classes)
            .into_iter()
            .enumerate()
            .map(|(l, (d_in, d_out))| {
                let limit = (6.0 / (d_in + d_out) as f64).sqrt();
                (0..per_layer)
                    .map(|s| {
                        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, l, s));
                        Array2::from_shape_simple_fn((d_in, d_out), || F::lit(rng.gen_range(-limit..limit)))
                    })
                    .collect()
            })
            .collect();
        ModelParams { mode: cfg.mode, streams: cfg.streams, layers }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            mode: self.mode,
            streams: self.streams,
            layers: self.layers.iter().map(|l| l.iter().map(|w| Array2::zeros(w.raw_dim())).collect()).collect(),
        }
    }

    /// Weight used by stream `t` of layer `l`.
    pub fn weight(&self, layer: usize, stream: usize) -> &Array2<F> {
        match self.mode {
            StreamMode::Separated => &self.layers[layer][stream],
            StreamMode::Shared => &self.layers[layer][0],
        }
    }

    pub fn weight_index(&self, stream: usize) -> usize {
        match self.mode {
            StreamMode::Separated => stream,
            StreamMode::Shared => 0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(|w| w.len()).sum()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Array2<F>> {
        self.layers.iter().flatten()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Array2<F>> {
        self.layers.iter_mut().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|w| w.iter().all(|v| v.is_finite()))
    }
}

/// `T²·d_ms·(1 + C)`: separated-mode parameter count with one hidden layer
/// whose input width is `T`.
pub fn separated_parameter_count(streams: usize, hidden_per_stream: usize, n_classes: usize) -> usize {
    streams * streams * hidden_per_stream * (1 + n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_formula() {
        let cfg = TrainConfig { streams: 4, hidden_per_stream: 3, ..TrainConfig::default() };
        let p = ModelParams::<f64>::init(&cfg, 4, 5);
        assert_eq!(p.parameter_count(), separated_parameter_count(4, 3, 5));
        let shared = ModelParams::<f64>::init(&TrainConfig { mode: StreamMode::Shared, ..cfg }, 4, 5);
        assert_eq!(shared.parameter_count(), 4 * 3 + 12 * 5);
    }

    #[test]
    fn defaults_match_hidden_width() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.layer_shapes(25, 8), vec![(25, 25), (625, 8)]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = TrainConfig { streams: 3, hidden_per_stream: 4, seed: 9, ..TrainConfig::default() };
        let a = ModelParams::<f64>::init(&cfg, 3, 2);
        assert_eq!(a, ModelParams::<f64>::init(&cfg, 3, 2));
        assert_ne!(a.layers[0][0], a.layers[0][1]);
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(a.layers[0][0].iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { dropout: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { patience: 3000, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { streams: 0, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Relu.apply(-2.0_f64), 0.0);
        assert_eq!(Activation::LeakyRelu.apply(-2.0_f64), -0.02);
        assert_eq!(Activation::LeakyRelu.derivative(-1.0_f64), 0.01);
        assert_eq!(Activation::Relu.derivative(3.0_f64), 1.0);
    }
}
