//! Corpus graph with `T`-dimensional edges.
//!
//! Node ids: words `0..U`, documents `U..U+K`. For every dimension `t` the
//! raw adjacency `ME(t)` holds
//! - word-word weights `tanh(1 / |W_i(t) - W_j(t)|)` over co-occurring pairs,
//! - doc-doc weights `tanh(1 / |D_i(t) - D_j(t)|)` for pairs sharing at least `u` words,
//! - word-doc TF-IDF weights, identical for every `t`.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed::EmbeddingMatrix;
use crate::scalar::Scalar;
use crate::sparse::{normalize, SparseMatrix};

/// Distance floor in the edge formula; a zero distance saturates to `tanh(1e12) = 1`.
pub const DISTANCE_EPSILON: f64 = 1e-12;
/// Raw word-word / doc-doc weights below this are not stored.
pub const MIN_EDGE_WEIGHT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Unordered word pairs (`i < j`) that appear within `window` positions of
/// each other in at least one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceIndex {
    pub pairs: BTreeSet<(usize, usize)>,
    pub window: usize,
}

impl CooccurrenceIndex {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }
}

pub fn cooccurrence_pairs(corpus: &Corpus, window: usize) -> CooccurrenceIndex {
    let mut pairs = BTreeSet::new();
    for doc in &corpus.docs {
        let toks = &doc.tokens;
        for (i, &a) in toks.iter().enumerate() {
            for &b in &toks[i + 1..(i + 1 + window).min(toks.len())] {
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    CooccurrenceIndex { pairs, window }
}

/// Every unordered pair of distinct words. Quadratic; meant for tiny corpora.
pub fn all_pairs(n_words: usize) -> CooccurrenceIndex {
    let pairs = (0..n_words).flat_map(|i| (i + 1..n_words).map(move |j| (i, j))).collect();
    CooccurrenceIndex { pairs, window: usize::MAX }
}

/// `tanh(1 / max(|a - b|, ε))`.
#[inline]
pub fn edge_weight<F: Scalar>(a: F, b: F) -> F {
    let d = (a - b).abs().max(F::lit(DISTANCE_EPSILON));
    d.recip().tanh()
}

/// One symmetric `n × n` matrix per embedding dimension over the given pairs.
fn per_dimension_edges<F: Scalar>(emb: &EmbeddingMatrix<F>, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Vec<SparseMatrix<F>> {
    let n = emb.rows();
    let floor = F::lit(MIN_EDGE_WEIGHT);
    (0..emb.dim())
        .map(|t| {
            let mut trip = Vec::new();
            for (i, j) in pairs.clone() {
                let w = edge_weight(emb.view()[[i, t]], emb.view()[[j, t]]);
                if w >= floor {
                    trip.push((i, j, w));
                    trip.push((j, i, w));
                }
            }
            SparseMatrix::from_triplets(n, n, trip)
        })
        .collect()
}

pub fn word_word_edges<F: Scalar>(word_emb: &EmbeddingMatrix<F>, pairs: &CooccurrenceIndex) -> Vec<SparseMatrix<F>> {
    per_dimension_edges(word_emb, pairs.pairs.iter().copied())
}

/// Upper-triangular counts of distinct shared words for every document pair
/// with non-zero overlap (`i < j`).
pub fn doc_overlap_counts(corpus: &Corpus) -> SparseMatrix<usize> {
    let k = corpus.n_docs();
    let unique: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .map(|d| {
            let mut t = d.tokens.clone();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect();
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); corpus.n_words()];
    for (d, toks) in unique.iter().enumerate() {
        for &w in toks {
            postings[w].push(d);
        }
    }
    let mut counts = vec![0usize; k];
    let mut trip = Vec::new();
    for (i, toks) in unique.iter().enumerate() {
        for &w in toks {
            let p = &postings[w];
            let start = p.partition_point(|&d| d <= i);
            for &j in &p[start..] {
                counts[j] += 1;
            }
        }
        for (j, c) in counts.iter_mut().enumerate().skip(i + 1) {
            if *c > 0 {
                trip.push((i, j, *c));
                *c = 0;
            }
        }
    }
    SparseMatrix::from_triplets(k, k, trip)
}

pub fn doc_doc_edges<F: Scalar>(doc_emb: &EmbeddingMatrix<F>, overlaps: &SparseMatrix<usize>, threshold: usize) -> Vec<SparseMatrix<F>> {
    let pairs: Vec<(usize, usize)> = overlaps
        .triplets()
        .filter(|&(i, j, c)| i != j && c >= threshold)
        .map(|(i, j, _)| (i.min(j), i.max(j)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    per_dimension_edges(doc_emb, pairs.iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfidfVariant {
    /// `count · ln(K / df)`; words present in every document get no edge.
    #[default]
    Raw,
    /// `count · (ln((1 + K) / (1 + df)) + 1)`.
    Smoothed,
}

/// `U × K` TF-IDF matrix.
pub fn tfidf<F: Scalar>(corpus: &Corpus, variant: TfidfVariant) -> SparseMatrix<F> {
    let (u, k) = (corpus.n_words(), corpus.n_docs());
    let mut df = vec![0usize; u];
    let mut counts: Vec<Vec<(usize, usize)>> = Vec::with_capacity(k);
    for doc in &corpus.docs {
        let mut toks = doc.tokens.clone();
        toks.sort_unstable();
        let mut c: Vec<(usize, usize)> = Vec::new();
        for w in toks {
            match c.last_mut() {
                Some((last, n)) if *last == w => *n += 1,
                _ => c.push((w, 1)),
            }
        }
        for &(w, _) in &c {
            df[w] += 1;
        }
        counts.push(c);
    }
    let kf = k as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| match variant {
            TfidfVariant::Raw => (kf / d as f64).ln(),
            TfidfVariant::Smoothed => ((1.0 + kf) / (1.0 + d as f64)).ln() + 1.0,
        })
        .collect();
    let mut trip = Vec::new();
    for (d, c) in counts.iter().enumerate() {
        for &(w, n) in c {
            let v = n as f64 * idf[w];
            if v > 0.0 {
                trip.push((w, d, F::lit(v)));
            }
        }
    }
    SparseMatrix::from_triplets(u, k, trip)
}

/// Node set, per-dimension raw and normalized adjacency, and input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiEdgeGraph<F> {
    pub n_words: usize,
    pub n_docs: usize,
    pub dims: usize,
    /// Raw `ME(t)` for each dimension.
    pub adjacency: Vec<SparseMatrix<F>>,
    /// `D̃^(-1/2)(ME(t) + I)D̃^(-1/2)` for each dimension.
    pub normalized: Vec<SparseMatrix<F>>,
    /// `N × T` features: word vectors stacked over document vectors.
    pub node_features: Array2<F>,
}

impl<F: Scalar> MultiEdgeGraph<F> {
    pub fn n_nodes(&self) -> usize {
        self.n_words + self.n_docs
    }

    pub fn doc_node(&self, doc_id: usize) -> usize {
        self.n_words + doc_id
    }

    /// Graph over explicit normalized matrices and features, bypassing text
    /// construction. Used for synthetic graphs in tests and checks.
    pub fn from_normalized(normalized: Vec<SparseMatrix<F>>, node_features: Array2<F>) -> Result<Self, GraphError> {
        let n = node_features.nrows();
        if normalized.is_empty() || normalized.iter().any(|m| m.n_rows() != n || m.n_cols() != n) {
            return Err(GraphError::ShapeMismatch(format!("expected non-empty list of {n}x{n} matrices")));
        }
        Ok(MultiEdgeGraph {
            n_words: 0,
            n_docs: n,
            dims: normalized.len(),
            adjacency: normalized.clone(),
            normalized,
            node_features,
        })
    }

    /// Relabels node `i` as `perm[i]` in every matrix and in the features.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut feats = Array2::zeros(self.node_features.raw_dim());
        for (i, &p) in perm.iter().enumerate() {
            feats.row_mut(p).assign(&self.node_features.row(i));
        }
        MultiEdgeGraph {
            n_words: self.n_words,
            n_docs: self.n_docs,
            dims: self.dims,
            adjacency: self.adjacency.iter().map(|m| m.permute(perm)).collect(),
            normalized: self.normalized.iter().map(|m| m.permute(perm)).collect(),
            node_features: feats,
        }
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.n_nodes();
        let per_dim = self
            .adjacency
            .iter()
            .map(|m| {
                let mut w: Vec<f64> = m.values().iter().map(|v| v.as_f64()).collect();
                w.sort_by(f64::total_cmp);
                let q = |p: f64| if w.is_empty() { f64::NAN } else { w[((w.len() - 1) as f64 * p).round() as usize] };
                DimensionStats { nnz: m.nnz(), quantiles: [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)] }
            })
            .collect();
        let degrees: Vec<usize> = self.adjacency.first().map_or(vec![0; n], |m| (0..n).map(|i| m.row_nnz(i)).collect());
        let mut degree_histogram = Vec::new();
        for d in degrees {
            // bucket b holds degrees in [2^(b-1), 2^b), bucket 0 holds 0
            let b = if d == 0 { 0 } else { (usize::BITS - d.leading_zeros()) as usize };
            if degree_histogram.len() <= b {
                degree_histogram.resize(b + 1, 0);
            }
            degree_histogram[b] += 1;
        }
        GraphStats { n_nodes: n, n_words: self.n_words, n_docs: self.n_docs, dims: self.dims, per_dim, degree_histogram }
    }
}

/// Persisted form of a graph: raw per-dimension CSR matrices and node
/// features. Normalized matrices are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot<F> {
    pub n_nodes: usize,
    pub n_words: usize,
    pub n_docs: usize,
    pub dims: usize,
    pub adjacency: Vec<SparseMatrix<F>>,
    pub node_features: Array2<F>,
}

impl<F: Scalar> From<&MultiEdgeGraph<F>> for GraphSnapshot<F> {
    fn from(g: &MultiEdgeGraph<F>) -> Self {
        GraphSnapshot {
            n_nodes: g.n_nodes(),
            n_words: g.n_words,
            n_docs: g.n_docs,
            dims: g.dims,
            adjacency: g.adjacency.clone(),
            node_features: g.node_features.clone(),
        }
    }
}

impl<F: Scalar> TryFrom<GraphSnapshot<F>> for MultiEdgeGraph<F> {
    type Error = GraphError;

    fn try_from(s: GraphSnapshot<F>) -> Result<Self, GraphError> {
        let n = s.n_words + s.n_docs;
        if s.n_nodes != n || s.adjacency.len() != s.dims || s.node_features.nrows() != n {
            return Err(GraphError::ShapeMismatch(format!(
                "snapshot declares N={} (U={} K={}) T={} but holds {} matrices and {} feature rows",
                s.n_nodes,
                s.n_words,
                s.n_docs,
                s.dims,
                s.adjacency.len(),
                s.node_features.nrows()
            )));
        }
        if s.adjacency.iter().any(|m| m.n_rows() != n || m.n_cols() != n) {
            return Err(GraphError::ShapeMismatch(format!("adjacency matrices must be {n}x{n}")));
        }
        let normalized = s.adjacency.iter().map(normalize).collect();
        Ok(MultiEdgeGraph {
            n_words: s.n_words,
            n_docs: s.n_docs,
            dims: s.dims,
            adjacency: s.adjacency,
            normalized,
            node_features: s.node_features,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionStats {
    pub nnz: usize,
    /// min, 25%, median, 75%, max of stored raw weights.
    pub quantiles: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_words: usize,
    pub n_docs: usize,
    pub dims: usize,
    pub per_dim: Vec<DimensionStats>,
    /// Power-of-two buckets of node degree (excluding self-loops) in dimension 0.
    pub degree_histogram: Vec<usize>,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes {} (words {}, docs {}), dimensions {}", self.n_nodes, self.n_words, self.n_docs, self.dims)?;
        writeln!(f, "degree histogram (dimension 0):")?;
        for (b, count) in self.degree_histogram.iter().enumerate() {
            let range = if b == 0 { "0".to_owned() } else { format!("{}..{}", 1usize << (b - 1), (1usize << b) - 1) };
            writeln!(f, "  {range:>12}  {count}")?;
        }
        writeln!(f, "{:>4} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12}", "t", "nnz", "min", "q25", "median", "q75", "max")?;
        for (t, d) in self.per_dim.iter().enumerate() {
            let [a, b, c, e, g] = d.quantiles;
            writeln!(f, "{t:>4} {:>10} {a:>12.6} {b:>12.6} {c:>12.6} {e:>12.6} {g:>12.6}", d.nnz)?;
        }
        Ok(())
    }
}

/// Stitches the blocks into `N × N` matrices (one per dimension) and normalizes them.
pub fn assemble<F: Scalar>(
    word_edges: &[SparseMatrix<F>],
    doc_edges: &[SparseMatrix<F>],
    tfidf: &SparseMatrix<F>,
    word_emb: &EmbeddingMatrix<F>,
    doc_emb: &EmbeddingMatrix<F>,
) -> Result<MultiEdgeGraph<F>, GraphError> {
    let (u, k, t) = (word_emb.rows(), doc_emb.rows(), word_emb.dim());
    let mismatch = |what: String| Err(GraphError::ShapeMismatch(what));
    if doc_emb.dim() != t {
        return mismatch(format!("word dim {t} vs doc dim {}", doc_emb.dim()));
    }
    if word_edges.len() != t || doc_edges.len() != t {
        return mismatch(format!("expected {t} edge matrices, got {} word / {} doc", word_edges.len(), doc_edges.len()));
    }
    if word_edges.iter().any(|m| m.n_rows() != u || m.n_cols() != u) {
        return mismatch(format!("word-word blocks must be {u}x{u}"));
    }
    if doc_edges.iter().any(|m| m.n_rows() != k || m.n_cols() != k) {
        return mismatch(format!("doc-doc blocks must be {k}x{k}"));
    }
    if tfidf.n_rows() != u || tfidf.n_cols() != k {
        return mismatch(format!("tf-idf must be {u}x{k}, got {}x{}", tfidf.n_rows(), tfidf.n_cols()));
    }
    let n = u + k;
    let word_doc: Vec<(usize, usize, F)> = tfidf.triplets().flat_map(|(w, d, v)| [(w, u + d, v), (u + d, w, v)]).collect();
    let adjacency: Vec<SparseMatrix<F>> = word_edges
        .iter()
        .zip(doc_edges)
        .map(|(ww, dd)| {
            let mut trip: Vec<(usize, usize, F)> = ww.triplets().collect();
            trip.extend(dd.triplets().map(|(i, j, v)| (u + i, u + j, v)));
            trip.extend_from_slice(&word_doc);
            SparseMatrix::from_triplets(n, n, trip)
        })
        .collect();
    let normalized = adjacency.iter().map(normalize).collect();
    let node_features = concatenate(Axis(0), &[word_emb.view(), doc_emb.view()]).expect("equal widths checked above");
    Ok(MultiEdgeGraph { n_words: u, n_docs: k, dims: t, adjacency, normalized, node_features })
}

/// Which word pairs receive word-word edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordPairMode {
    #[default]
    Cooccurrence,
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Minimum shared distinct words for a doc-doc edge (`u`).
    pub overlap_threshold: usize,
    pub word_pairs: WordPairMode,
    pub cooccurrence_window: usize,
    pub tfidf: TfidfVariant,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { overlap_threshold: 5, word_pairs: WordPairMode::Cooccurrence, cooccurrence_window: 5, tfidf: TfidfVariant::Raw }
    }
}

/// Full construction from a corpus and its trained embeddings.
pub fn build_graph<F: Scalar>(
    corpus: &Corpus,
    word_emb: &EmbeddingMatrix<F>,
    doc_emb: &EmbeddingMatrix<F>,
    cfg: &GraphConfig,
) -> Result<MultiEdgeGraph<F>, GraphError> {
    if word_emb.rows() != corpus.n_words() || doc_emb.rows() != corpus.n_docs() {
        return Err(GraphError::ShapeMismatch(format!(
            "embeddings {}+{} rows for corpus with U={} K={}",
            word_emb.rows(),
            doc_emb.rows(),
            corpus.n_words(),
            corpus.n_docs()
        )));
    }
    let pairs = match cfg.word_pairs {
        WordPairMode::Cooccurrence => cooccurrence_pairs(corpus, cfg.cooccurrence_window),
        WordPairMode::AllPairs => all_pairs(corpus.n_words()),
    };
    let ww = word_word_edges(word_emb, &pairs);
    let dd = doc_doc_edges(doc_emb, &doc_overlap_counts(corpus), cfg.overlap_threshold);
    let tf = tfidf(corpus, cfg.tfidf);
    assemble(&ww, &dd, &tf, word_emb, doc_emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelledText, TokenizerMode};
    use ndarray::array;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        let recs: Vec<LabelledText> = texts.iter().map(|t| LabelledText { label: Some("x".into()), text: (*t).into() }).collect();
        Corpus::from_texts(&recs, TokenizerMode::Pretokenized, 0).unwrap()
    }

    fn pair_names(c: &Corpus, idx: &CooccurrenceIndex) -> BTreeSet<(String, String)> {
        idx.pairs
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (c.vocab.token(a).to_owned(), c.vocab.token(b).to_owned());
                if x < y { (x, y) } else { (y, x) }
            })
            .collect()
    }

    #[test]
    fn cooccurrence_window_cases() {
        let c = corpus(&["a b c"]);
        let want: BTreeSet<(String, String)> =
            [("a", "b"), ("a", "c"), ("b", "c")].iter().map(|(x, y)| ((*x).into(), (*y).into())).collect();
        assert_eq!(pair_names(&c, &cooccurrence_pairs(&c, 5)), want);

        let c = corpus(&["a x x x x x b"]);
        let idx = cooccurrence_pairs(&c, 5);
        assert!(!idx.contains(c.vocab.id("a").unwrap(), c.vocab.id("b").unwrap()));
        assert!(!idx.contains(c.vocab.id("x").unwrap(), c.vocab.id("x").unwrap()));

        let c = corpus(&["a b", "b a"]);
        assert_eq!(cooccurrence_pairs(&c, 5).len(), 1);
    }

    #[test]
    fn edge_weight_values() {
        assert!((edge_weight(1.0_f64, 0.0) - 0.761_594_155_955_764_9).abs() < 1e-12);
        assert!((edge_weight(0.5_f64, 0.0) - 0.964_027_580_075_817).abs() < 1e-12);
        assert_eq!(edge_weight(0.3_f64, 0.3), 1.0);
    }

    #[test]
    fn overlap_counts() {
        let c = corpus(&["a b c", "b c d", "e f g"]);
        let o = doc_overlap_counts(&c);
        assert_eq!(o.get(0, 1), Some(2));
        assert_eq!(o.get(0, 2), None);
        assert_eq!(o.get(1, 2), None);
        let c = corpus(&["a b c d e f g", "g f e d c b a a"]);
        assert_eq!(doc_overlap_counts(&c).get(0, 1), Some(7));
    }

    #[test]
    fn doc_edges_respect_threshold() {
        let emb = EmbeddingMatrix::new(array![[0.0_f64], [1.0]]);
        let o4 = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 4usize)]);
        assert_eq!(doc_doc_edges(&emb, &o4, 5)[0].nnz(), 0);
        let o5 = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 5usize)]);
        let e = &doc_doc_edges(&emb, &o5, 5)[0];
        assert!((e.get(0, 1).unwrap() - 1f64.tanh()).abs() < 1e-12);
        assert_eq!(e.get(1, 0), e.get(0, 1));
        assert_eq!(e.get(0, 0), None);
    }

    #[test]
    fn tfidf_values() {
        // K=4, word "a" in 2 docs, 3 times in doc 0
        let c = corpus(&["a a a z", "a z", "b z", "b z"]);
        let m = tfidf::<f64>(&c, TfidfVariant::Raw);
        let a = c.vocab.id("a").unwrap();
        assert!((m.get(a, 0).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let z = c.vocab.id("z").unwrap();
        assert!((0..4).all(|d| m.get(z, d).is_none()));
        assert_eq!(m.get(a, 2), None);
        let s = tfidf::<f64>(&c, TfidfVariant::Smoothed);
        assert!((s.get(z, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assemble_counts_and_stacking() {
        let w = EmbeddingMatrix::new(array![[0.0_f64, 1.0], [1.0, 0.5]]);
        let d = EmbeddingMatrix::new(array![[0.2_f64, 0.3]]);
        let pairs = all_pairs(2);
        let ww = word_word_edges(&w, &pairs);
        let dd = vec![SparseMatrix::zeros(1, 1); 2];
        let tf = SparseMatrix::from_triplets(2, 1, vec![(0, 0, 0.7)]);
        let g = assemble(&ww, &dd, &tf, &w, &d).unwrap();
        assert_eq!(g.n_nodes(), 3);
        for m in &g.adjacency {
            assert_eq!(m.nnz(), 4);
            assert!(m.is_symmetric());
            assert_eq!(m.get(0, 2), Some(0.7));
        }
        assert_eq!(g.node_features.row(1), w.row(1));
        assert_eq!(g.node_features.row(2), d.row(0));
        for m in &g.normalized {
            assert!(m.is_symmetric());
            assert!((0..3).all(|i| m.get(i, i).is_some()));
        }
        let bad = SparseMatrix::zeros(3, 1);
        assert!(assemble(&ww, &dd, &bad, &w, &d).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let w = EmbeddingMatrix::new(array![[0.0_f64, 1.0], [1.0, 0.5]]);
        let d = EmbeddingMatrix::new(array![[0.2_f64, 0.3]]);
        let g = assemble(&word_word_edges(&w, &all_pairs(2)), &[SparseMatrix::zeros(1, 1), SparseMatrix::zeros(1, 1)], &SparseMatrix::from_triplets(2, 1, vec![(0, 0, 0.7)]), &w, &d).unwrap();
        let json = serde_json::to_string(&GraphSnapshot::from(&g)).unwrap();
        let back = MultiEdgeGraph::try_from(serde_json::from_str::<GraphSnapshot<f64>>(&json).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn stats_report_every_dimension() {
        let w = EmbeddingMatrix::new(array![[0.0_f64, 1.0], [1.0, 0.5]]);
        let d = EmbeddingMatrix::new(array![[0.2_f64, 0.3]]);
        let g = assemble(&word_word_edges(&w, &all_pairs(2)), &[SparseMatrix::zeros(1, 1), SparseMatrix::zeros(1, 1)], &SparseMatrix::from_triplets(2, 1, vec![(0, 0, 0.7)]), &w, &d).unwrap();
        let s = g.stats();
        assert_eq!(s.per_dim.len(), 2);
        assert_eq!(s.degree_histogram.iter().sum::<usize>(), 3);
        assert!(s.to_string().contains("nnz"));
    }

    proptest! {
        #[test]
        fn closer_values_get_heavier_edges(a in -5.0f64..5.0, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let wn = edge_weight(a, a + near);
            let wf = edge_weight(a, a + far);
            prop_assert!(wn >= wf);
            prop_assert!(wf > 0.0 && wn <= 1.0);
        }
    }
}
