//! CBOW word and document embeddings trained with negative sampling.
//!
//! Word vectors come from a `U × T` input projection; document vectors from a
//! `(U + K) × T` projection where row `U + k` is document `k`'s id vector,
//! summed into the hidden state together with the context words.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::scalar::{log_sigmoid, sigmoid, Scalar};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),
    #[error("embedding shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("embedding file has no row for {key:?}")]
    MissingRow { key: String },
    #[error("cannot parse {path} line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Dense row-per-node embedding matrix (`rows × dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix<F> {
    values: Array2<F>,
}

impl<F: Scalar> EmbeddingMatrix<F> {
    pub fn new(values: Array2<F>) -> Self {
        EmbeddingMatrix { values }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, F> {
        self.values.row(i)
    }

    pub fn view(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array2<F> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_row_norm(&self) -> F {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(F::zero(), F::max)
    }
}

/// Unigram noise distribution `p(w) ∝ freq(w)^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    pub fn new(frequencies: &[u64], exponent: f64) -> Self {
        let weights: Vec<f64> = frequencies.iter().map(|&f| (f as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        NoiseDistribution { weights, cumulative }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn probability(&self, id: usize) -> f64 {
        let prev = if id == 0 { 0.0 } else { self.cumulative[id - 1] };
        self.cumulative[id] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1)
    }
}

/// Draws `k` ids i.i.d. from `dist`, resampling any draw equal to `exclude`.
pub fn sample_negatives<R: Rng + ?Sized>(dist: &NoiseDistribution, k: usize, exclude: usize, rng: &mut R) -> Vec<usize> {
    let other_mass: f64 = dist.weights.iter().enumerate().filter(|&(i, _)| i != exclude).map(|(_, w)| w).sum();
    assert!(other_mass > 0.0, "noise distribution has no mass outside the excluded id");
    (0..k)
        .map(|_| loop {
            let id = dist.sample(rng);
            if id != exclude {
                break id;
            }
        })
        .collect()
}

/// How context projections combine into the hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    /// Embedding width T (also the number of edge dimensions and streams).
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub noise_exponent: f64,
    pub context: ContextMode,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 25,
            window: 5,
            epochs: 200,
            negatives: 5,
            lr_start: 0.025,
            noise_exponent: 0.75,
            context: ContextMode::Sum,
            seed: 0,
        }
    }
}

/// Gradient of the negative-sampling loss for one CBOW step, restricted to
/// the rows it touches. Rows are unique within each list.
#[derive(Debug, Clone, PartialEq)]
pub struct NsGradient<F> {
    pub loss: F,
    pub input: Vec<(usize, Vec<F>)>,
    pub output: Vec<(usize, Vec<F>)>,
}

fn accumulate<F: Scalar>(rows: &mut Vec<(usize, Vec<F>)>, id: usize, scale: F, v: &[F]) {
    let slot = match rows.iter().position(|(r, _)| *r == id) {
        Some(p) => p,
        None => {
            rows.push((id, vec![F::zero(); v.len()]));
            rows.len() - 1
        }
    };
    for (g, &x) in rows[slot].1.iter_mut().zip(v) {
        *g += scale * x;
    }
}

/// CBOW network: input projection (words, optionally followed by document
/// rows) and an output projection of the same height.
#[derive(Debug, Clone, PartialEq)]
pub struct CbowModel<F> {
    input: Array2<F>,
    output: Array2<F>,
    n_words: usize,
    context: ContextMode,
}

impl<F: Scalar> CbowModel<F> {
    /// `rows` input vectors drawn uniformly from `[-0.5/T, 0.5/T]`; output projection zero.
    pub fn new(n_words: usize, rows: usize, dim: usize, context: ContextMode, rng: &mut impl Rng) -> Self {
        let half = 0.5 / dim as f64;
        let input = Array2::from_shape_simple_fn((rows, dim), || F::lit(rng.gen_range(-half..half)));
        CbowModel { input, output: Array2::zeros((rows, dim)), n_words, context }
    }

    pub fn from_parts(input: Array2<F>, output: Array2<F>, n_words: usize, context: ContextMode) -> Self {
        assert_eq!(input.dim(), output.dim());
        CbowModel { input, output, n_words, context }
    }

    pub fn input(&self) -> &Array2<F> {
        &self.input
    }

    pub fn output(&self) -> &Array2<F> {
        &self.output
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    /// Trainable scalars in both projections.
    pub fn parameter_count(&self) -> usize {
        self.input.len() + self.output.len()
    }

    fn hidden(&self, context: &[usize]) -> Vec<F> {
        let mut h = vec![F::zero(); self.input.ncols()];
        for &c in context {
            for (x, &w) in h.iter_mut().zip(self.input.row(c)) {
                *x += w;
            }
        }
        if self.context == ContextMode::Mean {
            let n = F::lit(context.len() as f64);
            h.iter_mut().for_each(|x| *x /= n);
        }
        h
    }

    fn score(&self, h: &[F], target: usize) -> F {
        self.output.row(target).iter().zip(h).map(|(&a, &b)| a * b).sum()
    }

    /// `-ln σ(h·o_target) - Σ ln σ(-h·o_neg)`.
    pub fn loss(&self, context: &[usize], target: usize, negatives: &[usize]) -> F {
        let h = self.hidden(context);
        -log_sigmoid(self.score(&h, target)) - negatives.iter().map(|&n| log_sigmoid(-self.score(&h, n))).sum::<F>()
    }

    pub fn gradient(&self, context: &[usize], target: usize, negatives: &[usize]) -> NsGradient<F> {
        let h = self.hidden(context);
        let dim = h.len();
        let mut loss = F::zero();
        let mut dh = vec![F::zero(); dim];
        let mut output = Vec::with_capacity(negatives.len() + 1);
        let labelled = std::iter::once((target, true)).chain(negatives.iter().map(|&n| (n, false)));
        for (row, positive) in labelled {
            let s = self.score(&h, row);
            // d/ds of -ln σ(s) is σ(s) - 1; of -ln σ(-s) is σ(s)
            let g = if positive {
                loss -= log_sigmoid(s);
                sigmoid(s) - F::one()
            } else {
                loss -= log_sigmoid(-s);
                sigmoid(s)
            };
            for (d, &o) in dh.iter_mut().zip(self.output.row(row)) {
                *d += g * o;
            }
            accumulate(&mut output, row, g, &h);
        }
        let scale = match self.context {
            ContextMode::Sum => F::one(),
            ContextMode::Mean => F::one() / F::lit(context.len() as f64),
        };
        let mut input = Vec::with_capacity(context.len());
        for &c in context {
            accumulate(&mut input, c, scale, &dh);
        }
        NsGradient { loss, input, output }
    }

    /// Plain SGD step `θ ← θ - lr·∇`.
    pub fn apply(&mut self, grad: &NsGradient<F>, lr: F) {
        for (row, g) in &grad.input {
            self.input.row_mut(*row).iter_mut().zip(g).for_each(|(w, &d)| *w -= lr * d);
        }
        for (row, g) in &grad.output {
            self.output.row_mut(*row).iter_mut().zip(g).for_each(|(w, &d)| *w -= lr * d);
        }
    }
}

/// Trainable scalars of the word model: `2·U·T`.
pub fn word2vec_parameter_count(n_words: usize, dim: usize) -> usize {
    2 * n_words * dim
}

/// Trainable scalars of the document model: `2·T·(U + K)`.
pub fn doc2vec_parameter_count(n_words: usize, n_docs: usize, dim: usize) -> usize {
    2 * dim * (n_words + n_docs)
}

fn check_corpus(corpus: &Corpus, cfg: &EmbedConfig) -> Result<(), EmbedError> {
    if cfg.dim == 0 {
        return Err(EmbedError::DegenerateCorpus("embedding dimension must be at least 1".into()));
    }
    if corpus.n_words() < 2 {
        return Err(EmbedError::DegenerateCorpus(format!(
            "negative sampling needs at least 2 vocabulary words, corpus has {}",
            corpus.n_words()
        )));
    }
    Ok(())
}

/// Builds a fresh word-level CBOW model for `corpus` (`U` rows).
pub fn word_model<F: Scalar>(corpus: &Corpus, cfg: &EmbedConfig) -> CbowModel<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    CbowModel::new(corpus.n_words(), corpus.n_words(), cfg.dim, cfg.context, &mut rng)
}

/// Builds a fresh document-level CBOW model for `corpus` (`U + K` rows).
pub fn doc_model<F: Scalar>(corpus: &Corpus, cfg: &EmbedConfig) -> CbowModel<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0D0C_0D0C);
    let rows = corpus.n_words() + corpus.n_docs();
    CbowModel::new(corpus.n_words(), rows, cfg.dim, cfg.context, &mut rng)
}

/// Runs the CBOW training loop. With `with_docs`, row `U + k` joins every
/// context drawn from document `k`.
fn train_cbow<F: Scalar>(corpus: &Corpus, cfg: &EmbedConfig, model: &mut CbowModel<F>, with_docs: bool, seed: u64) -> Result<(), EmbedError> {
    let n_words = corpus.n_words();
    let total_tokens: usize = corpus.docs.iter().map(|d| d.tokens.len()).sum();
    let has_pair = with_docs && total_tokens > 0 || corpus.docs.iter().any(|d| d.tokens.len() >= 2 && cfg.window >= 1);
    if !has_pair {
        return Err(EmbedError::DegenerateCorpus("no (center, context) pair exists".into()));
    }
    let dist = NoiseDistribution::new(corpus.vocab.frequencies(), cfg.noise_exponent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_steps = (cfg.epochs * total_tokens).max(1) as f64;
    let mut processed = 0usize;
    let mut context = Vec::with_capacity(2 * cfg.window + 1);
    for _ in 0..cfg.epochs {
        for doc in &corpus.docs {
            let toks = &doc.tokens;
            for pos in 0..toks.len() {
                let progress = processed as f64 / total_steps;
                processed += 1;
                context.clear();
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(toks.len());
                context.extend_from_slice(&toks[lo..pos]);
                context.extend_from_slice(&toks[pos + 1..hi]);
                if with_docs {
                    context.push(n_words + doc.id);
                }
                if context.is_empty() {
                    continue;
                }
                let lr = F::lit(cfg.lr_start * (1.0 - progress).max(1e-4));
                let negatives = sample_negatives(&dist, cfg.negatives, toks[pos], &mut rng);
                let grad = model.gradient(&context, toks[pos], &negatives);
                model.apply(&grad, lr);
            }
        }
    }
    Ok(())
}

/// Trains CBOW word vectors; returns the `U × T` input projection.
pub fn train_word2vec<F: Scalar>(corpus: &Corpus, cfg: &EmbedConfig) -> Result<EmbeddingMatrix<F>, EmbedError> {
    check_corpus(corpus, cfg)?;
    let mut model = word_model::<F>(corpus, cfg);
    debug_assert_eq!(model.parameter_count(), word2vec_parameter_count(corpus.n_words(), cfg.dim));
    train_cbow(corpus, cfg, &mut model, false, cfg.seed.wrapping_add(1))?;
    Ok(EmbeddingMatrix::new(model.input))
}

/// Trains CBOW document vectors; returns the `K × T` document rows of the
/// `(U + K) × T` input projection.
pub fn train_doc2vec<F: Scalar>(corpus: &Corpus, cfg: &EmbedConfig) -> Result<EmbeddingMatrix<F>, EmbedError> {
    check_corpus(corpus, cfg)?;
    if corpus.n_docs() == 0 {
        return Err(EmbedError::DegenerateCorpus("corpus has no documents".into()));
    }
    let mut model = doc_model::<F>(corpus, cfg);
    debug_assert_eq!(model.parameter_count(), doc2vec_parameter_count(corpus.n_words(), corpus.n_docs(), cfg.dim));
    train_cbow(corpus, cfg, &mut model, true, cfg.seed.wrapping_add(2))?;
    let n_words = corpus.n_words();
    Ok(EmbeddingMatrix::new(model.input.slice_axis(Axis(0), (n_words..).into()).to_owned()))
}

/// Row keys for document embeddings: `doc:<id>`.
pub fn doc_keys(n_docs: usize) -> Vec<String> {
    (0..n_docs).map(|i| format!("doc:{i}")).collect()
}

/// Writes `#dim=T` followed by `key<TAB>v1<TAB>…<TAB>vT` rows. Values use
/// shortest round-trip formatting, so reading back is bit-exact.
pub fn write_embeddings<F: Scalar>(path: &Path, keys: &[String], emb: &EmbeddingMatrix<F>) -> Result<(), EmbedError> {
    assert_eq!(keys.len(), emb.rows(), "one key per embedding row");
    let mut out = String::new();
    writeln!(out, "#dim={}", emb.dim()).unwrap();
    for (key, row) in keys.iter().zip(emb.values.rows()) {
        out.push_str(key);
        for v in row {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    crate::io::write_atomic(path, out.as_bytes()).map_err(|source| EmbedError::Io { path: path.to_owned(), source })
}

/// Reads an embedding TSV, returning rows in the order of `keys`. Rows for
/// unknown keys are ignored.
pub fn load_embeddings<F: Scalar>(path: &Path, keys: &[String], expected_dim: usize) -> Result<EmbeddingMatrix<F>, EmbedError> {
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io { path: path.to_owned(), source })?;
    let parse_err = |line: usize, reason: String| EmbedError::Parse { path: path.to_owned(), line, reason };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let dim: usize = header
        .strip_prefix("#dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| parse_err(1, format!("expected `#dim=T` header, got {header:?}")))?;
    if dim != expected_dim {
        return Err(EmbedError::ShapeMismatch { expected: format!("dim {expected_dim}"), found: format!("dim {dim}") });
    }
    let mut rows: HashMap<&str, Vec<F>> = HashMap::with_capacity(keys.len());
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default();
        let values: Vec<F> = fields
            .map(|f| f.parse::<F>().map_err(|e| parse_err(i + 1, e.to_string())))
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(EmbedError::ShapeMismatch {
                expected: format!("{dim} values for {key:?}"),
                found: format!("{} values", values.len()),
            });
        }
        rows.insert(key, values);
    }
    let mut out = Array2::zeros((keys.len(), dim));
    for (r, key) in keys.iter().enumerate() {
        let values = rows.get(key.as_str()).ok_or_else(|| EmbedError::MissingRow { key: key.clone() })?;
        out.row_mut(r).iter_mut().zip(values).for_each(|(o, &v)| *o = v);
    }
    Ok(EmbeddingMatrix::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, LabelledText, SyntheticSpec, TokenizerMode};

    fn small_cfg(dim: usize, epochs: usize) -> EmbedConfig {
        EmbedConfig { dim, epochs, seed: 3, ..EmbedConfig::default() }
    }

    fn ab_corpus() -> Corpus {
        let text = "a b ".repeat(20);
        Corpus::from_texts(&[LabelledText { label: Some("x".into()), text }], TokenizerMode::Pretokenized, 0).unwrap()
    }

    #[test]
    fn noise_weights_follow_power_law() {
        let d = NoiseDistribution::new(&[81, 16], 0.75);
        assert!((d.weights()[0] - 27.0).abs() < 1e-9);
        assert!((d.weights()[1] - 8.0).abs() < 1e-9);
        assert!((d.probability(0) - 27.0 / 35.0).abs() < 1e-12);
        assert_eq!(*d.cumulative().last().unwrap(), 1.0);
    }

    #[test]
    fn negatives_avoid_excluded_id() {
        let d = NoiseDistribution::new(&[1, 1], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_negatives(&d, 5, 0, &mut rng);
        assert_eq!(s, vec![1; 5]);
    }

    #[test]
    fn empirical_negative_frequencies() {
        let d = NoiseDistribution::new(&[81, 16], 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200_000;
        let zeros = (0..n).filter(|_| d.sample(&mut rng) == 0).count();
        let p = zeros as f64 / n as f64;
        assert!((p - 27.0 / 35.0).abs() < 0.01, "p = {p}");
    }

    #[test]
    fn parameter_counts() {
        let corpus = generate_synthetic(&SyntheticSpec { classes: 2, docs_per_class: 5, vocab_per_class: 4, shared_vocab: 2, doc_length: 6, seed: 0 });
        let cfg = small_cfg(7, 1);
        let (u, k) = (corpus.n_words(), corpus.n_docs());
        assert_eq!(word_model::<f64>(&corpus, &cfg).parameter_count(), word2vec_parameter_count(u, 7));
        assert_eq!(doc_model::<f64>(&corpus, &cfg).parameter_count(), doc2vec_parameter_count(u, k, 7));
    }

    #[test]
    fn two_word_corpus_trains_finite() {
        let corpus = ab_corpus();
        let w = train_word2vec::<f64>(&corpus, &small_cfg(2, 20)).unwrap();
        assert_eq!((w.rows(), w.dim()), (2, 2));
        assert!(w.is_finite());
        let d = train_doc2vec::<f64>(&corpus, &small_cfg(2, 20)).unwrap();
        assert_eq!((d.rows(), d.dim()), (1, 2));
        assert!(d.is_finite());
    }

    #[test]
    fn single_token_documents_are_degenerate_for_words() {
        let recs: Vec<LabelledText> = ["a", "b", "a"].iter().map(|t| LabelledText { label: None, text: (*t).into() }).collect();
        let corpus = Corpus::from_texts(&recs, TokenizerMode::Pretokenized, 0).unwrap();
        assert!(matches!(train_word2vec::<f64>(&corpus, &small_cfg(3, 2)), Err(EmbedError::DegenerateCorpus(_))));
        // the document row still provides context
        assert!(train_doc2vec::<f64>(&corpus, &small_cfg(3, 2)).is_ok());
    }

    #[test]
    fn one_word_vocabulary_is_rejected() {
        let recs = vec![LabelledText { label: None, text: "a a a".into() }];
        let corpus = Corpus::from_texts(&recs, TokenizerMode::Pretokenized, 0).unwrap();
        assert!(matches!(train_word2vec::<f64>(&corpus, &small_cfg(3, 2)), Err(EmbedError::DegenerateCorpus(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = ab_corpus();
        let a = train_doc2vec::<f64>(&corpus, &small_cfg(4, 5)).unwrap();
        let b = train_doc2vec::<f64>(&corpus, &small_cfg(4, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.tsv");
        let keys: Vec<String> = vec!["x".into(), "y".into()];
        let m = EmbeddingMatrix::new(ndarray::array![[0.1_f64, -1e-300], [std::f64::consts::PI, 2.5]]);
        write_embeddings(&path, &keys, &m).unwrap();
        assert_eq!(load_embeddings::<f64>(&path, &keys, 2).unwrap(), m);
        assert!(matches!(load_embeddings::<f64>(&path, &keys, 3), Err(EmbedError::ShapeMismatch { .. })));
        let more = vec!["x".into(), "z".into()];
        match load_embeddings::<f64>(&path, &more, 2) {
            Err(EmbedError::MissingRow { key }) => assert_eq!(key, "z"),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "#dim=2\nx\t1\t2\ny\t1\n").unwrap();
        assert!(matches!(load_embeddings::<f64>(&path, &keys, 2), Err(EmbedError::ShapeMismatch { .. })));
    }
}
