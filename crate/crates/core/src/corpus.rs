//! Labelled text corpora: tokenization, frequency-filtered vocabulary,
//! stratified splits and synthetic fixtures.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no token occurs more than {min_count} times; lower min_count")]
    AllTokensFiltered { min_count: u64 },
    #[error("class {class:?} cannot contribute a training document")]
    ClassTooSmall { class: String },
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("invalid split fraction {name}={value}")]
    InvalidFraction { name: &'static str, value: f64 },
    #[error("malformed dataset {path}: {reason}")]
    MalformedDataset { path: PathBuf, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    /// Lowercase, split on Unicode word boundaries, drop pure punctuation.
    #[default]
    English,
    /// Whitespace split only; for corpora tokenized upstream.
    Pretokenized,
}

pub fn tokenize(text: &str, mode: TokenizerMode) -> Vec<String> {
    match mode {
        TokenizerMode::English => text.unicode_words().map(|w| w.to_lowercase()).collect(),
        TokenizerMode::Pretokenized => text.split_whitespace().map(str::to_owned).collect(),
    }
}

/// Frequency-filtered token ↔ id mapping.
///
/// Ids are assigned by descending corpus frequency, ties broken
/// lexicographically, so every downstream matrix is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    frequency: Vec<u64>,
    min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    frequency: Vec<u64>,
    min_count: u64,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let token_to_id = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { token_to_id, id_to_token: r.tokens, frequency: r.frequency, min_count: r.min_count }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { tokens: v.id_to_token, frequency: v.frequency, min_count: v.min_count }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequency[id]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

/// Keeps exactly the tokens whose corpus frequency is strictly greater than `min_count`.
pub fn build_vocab<S: AsRef<str>>(docs: &[Vec<S>], min_count: u64) -> Result<Vocabulary, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for tok in doc {
            *counts.entry(tok.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c > min_count).collect();
    if kept.is_empty() {
        return Err(CorpusError::AllTokensFiltered { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let id_to_token: Vec<String> = kept.iter().map(|(t, _)| (*t).to_owned()).collect();
    let frequency = kept.iter().map(|&(_, c)| c).collect();
    let token_to_id = id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { token_to_id, id_to_token, frequency, min_count })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<usize>,
    /// `None` marks an unlabelled document.
    pub label: Option<usize>,
    pub raw_text: String,
}

/// One input record before tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledText {
    pub label: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub docs: Vec<Document>,
    pub class_names: Vec<String>,
}

impl Corpus {
    /// Tokenizes, filters by frequency and drops documents left empty.
    ///
    /// Label strings are interned to class ids in first-appearance order.
    pub fn from_texts(records: &[LabelledText], mode: TokenizerMode, min_count: u64) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut class_names: Vec<String> = Vec::new();
        let mut class_ids: HashMap<String, usize> = HashMap::new();
        let labels: Vec<Option<usize>> = records
            .iter()
            .map(|r| {
                r.label.as_ref().map(|name| {
                    *class_ids.entry(name.clone()).or_insert_with(|| {
                        class_names.push(name.clone());
                        class_names.len() - 1
                    })
                })
            })
            .collect();
        let tokenized: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text, mode)).collect();
        let vocab = build_vocab(&tokenized, min_count)?;

        let mut docs = Vec::with_capacity(records.len());
        let mut dropped = 0usize;
        for ((toks, label), record) in tokenized.iter().zip(labels).zip(records) {
            let ids: Vec<usize> = toks.iter().filter_map(|t| vocab.id(t)).collect();
            if ids.is_empty() {
                dropped += 1;
                continue;
            }
            docs.push(Document { id: docs.len(), tokens: ids, label, raw_text: record.text.clone() });
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} documents with no tokens left after min_count={min_count} filtering");
        }
        if docs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(Corpus { vocab, docs, class_names })
    }

    /// Number of documents (K).
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    /// Number of vocabulary words (U).
    pub fn n_words(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.docs.iter().map(|d| d.label).collect()
    }

    pub fn snapshot(&self, splits: &SplitAssignment, seed: u64) -> CorpusSnapshot {
        CorpusSnapshot {
            vocab: self.vocab.clone(),
            docs: self.docs.iter().map(|d| d.tokens.clone()).collect(),
            labels: self.labels(),
            class_names: self.class_names.clone(),
            raw_text: self.docs.iter().map(|d| d.raw_text.clone()).collect(),
            splits: splits.clone(),
            seed,
        }
    }
}

/// Serialized corpus state sufficient for bit-exact reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub vocab: Vocabulary,
    pub docs: Vec<Vec<usize>>,
    pub labels: Vec<Option<usize>>,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub raw_text: Vec<String>,
    pub splits: SplitAssignment,
    pub seed: u64,
}

impl CorpusSnapshot {
    pub fn into_parts(self) -> (Corpus, SplitAssignment) {
        let mut raw = self.raw_text.into_iter();
        let docs = self
            .docs
            .into_iter()
            .zip(self.labels)
            .enumerate()
            .map(|(id, (tokens, label))| Document { id, tokens, label, raw_text: raw.next().unwrap_or_default() })
            .collect();
        (Corpus { vocab: self.vocab, docs, class_names: self.class_names }, self.splits)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_owned(), source }
}

/// Reads a dataset: either a directory with `docs.txt` and `labels.txt`
/// (line-aligned) or a single `label<TAB>text` file. An empty label marks an
/// unlabelled document.
pub fn load_dataset(path: &Path) -> Result<Vec<LabelledText>, CorpusError> {
    let label_of = |s: &str| {
        let s = s.trim();
        (!s.is_empty()).then(|| s.to_owned())
    };
    if path.is_dir() {
        let docs_path = path.join("docs.txt");
        let labels_path = path.join("labels.txt");
        let docs = fs::read_to_string(&docs_path).map_err(io_err(&docs_path))?;
        let labels = fs::read_to_string(&labels_path).map_err(io_err(&labels_path))?;
        let docs: Vec<&str> = docs.lines().collect();
        let labels: Vec<&str> = labels.lines().collect();
        if docs.len() != labels.len() {
            return Err(CorpusError::MalformedDataset {
                path: path.to_owned(),
                reason: format!("{} documents but {} labels", docs.len(), labels.len()),
            });
        }
        Ok(docs
            .into_iter()
            .zip(labels)
            .map(|(text, label)| LabelledText { label: label_of(label), text: text.to_owned() })
            .collect())
    } else {
        let content = fs::read_to_string(path).map_err(io_err(path))?;
        content
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| match line.split_once('\t') {
                Some((label, text)) => Ok(LabelledText { label: label_of(label), text: text.to_owned() }),
                None => Err(CorpusError::MalformedDataset {
                    path: path.to_owned(),
                    reason: format!("line {} has no tab separator", i + 1),
                }),
            })
            .collect()
    }
}

/// Disjoint train / validation / test document ids over the labelled documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
    pub label_ratio: f64,
    pub val_fraction: f64,
}

/// Splits `total` across classes proportionally to `sizes` by largest
/// remainder, with a per-class `floor` and `caps`. Exact integer arithmetic.
fn apportion(sizes: &[usize], total: usize, floor: usize, caps: &[usize]) -> Option<Vec<usize>> {
    let denom: usize = sizes.iter().sum();
    if denom == 0 {
        return (total == 0).then(|| vec![0; sizes.len()]);
    }
    let mut counts = Vec::with_capacity(sizes.len());
    let mut remainders = Vec::with_capacity(sizes.len());
    for (&size, &cap) in sizes.iter().zip(caps) {
        let num = total * size;
        counts.push((num / denom).max(floor).min(cap));
        remainders.push(num % denom);
    }
    // classes ordered by remainder desc, lower id first on ties
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    loop {
        let assigned: usize = counts.iter().sum();
        if assigned == total {
            return Some(counts);
        }
        if assigned < total {
            let c = order.iter().copied().find(|&c| counts[c] < caps[c])?;
            counts[c] += 1;
            // rotate so the next increment goes elsewhere first
            order.retain(|&x| x != c);
            order.push(c);
        } else {
            let c = order.iter().rev().copied().find(|&c| counts[c] > floor)?;
            counts[c] -= 1;
            order.retain(|&x| x != c);
            order.insert(0, c);
        }
    }
}

/// Stratified, seed-deterministic split of the labelled documents.
///
/// `round(label_ratio * labelled)` documents are drawn for supervision
/// (raised to one per class if needed); `round(val_fraction * drawn)` of
/// them are held out for validation. Both draws follow the corpus class
/// proportions. Everything else labelled goes to test.
pub fn make_splits(corpus: &Corpus, label_ratio: f64, val_fraction: f64, seed: u64) -> Result<SplitAssignment, CorpusError> {
    if !(label_ratio > 0.0 && label_ratio <= 1.0) {
        return Err(CorpusError::InvalidFraction { name: "label_ratio", value: label_ratio });
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(CorpusError::InvalidFraction { name: "val_fraction", value: val_fraction });
    }
    let n_classes = corpus.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for doc in &corpus.docs {
        if let Some(c) = doc.label {
            by_class[c].push(doc.id);
        }
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(CorpusError::ClassTooSmall { class: corpus.class_names[c].clone() });
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let labelled: usize = sizes.iter().sum();
    if labelled == 0 {
        return Err(CorpusError::EmptyCorpus);
    }

    let pool = ((label_ratio * labelled as f64).round() as usize).clamp(1, labelled);
    let mut n_val = (val_fraction * pool as f64).round() as usize;
    let n_train = (pool - n_val).max(n_classes);
    if n_train + n_val > labelled {
        n_val = labelled.saturating_sub(n_train);
    }
    let too_small = || {
        let c = sizes.iter().enumerate().min_by_key(|&(_, s)| *s).map_or(0, |(c, _)| c);
        CorpusError::ClassTooSmall { class: corpus.class_names[c].clone() }
    };
    let train_counts = apportion(&sizes, n_train, 1, &sizes).ok_or_else(too_small)?;
    let spare: Vec<usize> = sizes.iter().zip(&train_counts).map(|(s, t)| s - t).collect();
    let val_counts = apportion(&sizes, n_val, 0, &spare).ok_or_else(too_small)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train_ids, mut val_ids, mut test_ids) = (Vec::new(), Vec::new(), Vec::new());
    for (c, mut ids) in by_class.into_iter().enumerate() {
        ids.shuffle(&mut rng);
        let (tr, rest) = ids.split_at(train_counts[c]);
        let (va, te) = rest.split_at(val_counts[c]);
        train_ids.extend_from_slice(tr);
        val_ids.extend_from_slice(va);
        test_ids.extend_from_slice(te);
    }
    train_ids.sort_unstable();
    val_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(SplitAssignment { train_ids, val_ids, test_ids, seed, label_ratio, val_fraction })
}

/// Parameters of a synthetic corpus; see [`generate_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    pub doc_length: usize,
    pub seed: u64,
}

/// Builds a labelled corpus where each class samples tokens uniformly from
/// its own exclusive word pool plus a pool shared by all classes.
///
/// No frequency filtering is applied (min_count = 0).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared: Vec<String> = (0..spec.shared_vocab).map(|i| format!("s{i}")).collect();
    let mut records = Vec::with_capacity(spec.classes * spec.docs_per_class);
    for c in 0..spec.classes {
        let mut pool: Vec<String> = (0..spec.vocab_per_class).map(|i| format!("c{c}w{i}")).collect();
        pool.extend(shared.iter().cloned());
        for _ in 0..spec.docs_per_class {
            let words: Vec<&str> = (0..spec.doc_length).map(|_| pool[rng.gen_range(0..pool.len())].as_str()).collect();
            records.push(LabelledText { label: Some(format!("class{c}")), text: words.join(" ") });
        }
    }
    Corpus::from_texts(&records, TokenizerMode::Pretokenized, 0).expect("synthetic corpus has tokens")
}

/// Per-class document counts of `ids` (for reports and checks).
pub fn class_histogram(corpus: &Corpus, ids: &[usize]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for &id in ids {
        if let Some(c) = corpus.docs[id].label {
            *hist.entry(c).or_default() += 1;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn records(texts: &[(&str, &str)]) -> Vec<LabelledText> {
        texts
            .iter()
            .map(|(l, t)| LabelledText { label: Some((*l).to_owned()), text: (*t).to_owned() })
            .collect()
    }

    fn balanced(n: usize, classes: usize) -> Corpus {
        let recs: Vec<LabelledText> = (0..n)
            .map(|i| LabelledText { label: Some(format!("c{}", i % classes)), text: "w".into() })
            .collect();
        Corpus::from_texts(&recs, TokenizerMode::Pretokenized, 0).unwrap()
    }

    #[test]
    fn english_tokenizer() {
        assert_eq!(tokenize("The cat sat.", TokenizerMode::English), vec!["the", "cat", "sat"]);
        assert!(tokenize("", TokenizerMode::English).is_empty());
        assert!(tokenize("... !!", TokenizerMode::English).is_empty());
    }

    #[test]
    fn pretokenized_splits_on_whitespace_only() {
        assert_eq!(tokenize("很 好吃", TokenizerMode::Pretokenized), vec!["很", "好吃"]);
        assert_eq!(tokenize("a,b  c.", TokenizerMode::Pretokenized), vec!["a,b", "c."]);
    }

    #[test]
    fn vocab_boundary_is_strictly_greater() {
        let mut doc = vec!["alpha"; 6];
        doc.extend(vec!["beta"; 5]);
        let v = build_vocab(&[doc], 5).unwrap();
        assert_eq!(v.tokens(), &["alpha".to_owned()]);
        assert_eq!(v.frequency(0), 6);
    }

    #[test]
    fn vocab_orders_by_frequency_then_lexicographic() {
        let docs = vec![vec!["b", "a", "c", "c", "d", "d"]];
        let v = build_vocab(&docs, 0).unwrap();
        assert_eq!(v.tokens(), &["c", "d", "a", "b"]);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn vocab_all_filtered() {
        let err = build_vocab(&[vec!["a", "b"]], 5).unwrap_err();
        assert!(matches!(err, CorpusError::AllTokensFiltered { min_count: 5 }));
    }

    #[test]
    fn empty_documents_are_dropped() {
        let recs = records(&[("x", "a a a"), ("y", "zzz"), ("x", "a b b")]);
        let c = Corpus::from_texts(&recs, TokenizerMode::English, 1).unwrap();
        assert_eq!(c.n_docs(), 2);
        assert_eq!(c.docs[1].id, 1);
        assert_eq!(c.docs[1].raw_text, "a b b");
        assert_eq!(c.class_names, vec!["x", "y"]);
    }

    #[test]
    fn splits_match_worked_example() {
        let c = balanced(3000, 2);
        let s = make_splits(&c, 0.01, 0.10, 7).unwrap();
        assert_eq!((s.train_ids.len(), s.val_ids.len(), s.test_ids.len()), (27, 3, 2970));
        let hist = class_histogram(&c, &s.train_ids);
        for &n in hist.values() {
            assert!(n == 13 || n == 14);
        }
    }

    #[test]
    fn full_supervision_split() {
        let c = balanced(20, 2);
        let s = make_splits(&c, 1.0, 0.0, 0).unwrap();
        assert_eq!(s.train_ids.len(), 20);
        assert!(s.val_ids.is_empty() && s.test_ids.is_empty());
    }

    #[test]
    fn splits_are_seed_deterministic() {
        let c = balanced(500, 3);
        assert_eq!(make_splits(&c, 0.05, 0.1, 11).unwrap(), make_splits(&c, 0.05, 0.1, 11).unwrap());
        assert_ne!(make_splits(&c, 0.05, 0.1, 11).unwrap(), make_splits(&c, 0.05, 0.1, 12).unwrap());
    }

    #[test]
    fn tiny_ratio_still_gives_one_per_class() {
        let c = balanced(90, 3);
        let s = make_splits(&c, 0.01, 0.1, 3).unwrap();
        assert_eq!(class_histogram(&c, &s.train_ids).len(), 3);
    }

    #[test]
    fn class_without_documents_is_rejected() {
        let mut c = balanced(10, 2);
        c.class_names.push("ghost".into());
        assert!(matches!(make_splits(&c, 0.5, 0.1, 0), Err(CorpusError::ClassTooSmall { .. })));
    }

    #[test]
    fn synthetic_counts_and_determinism() {
        let spec = SyntheticSpec { classes: 3, docs_per_class: 100, vocab_per_class: 20, shared_vocab: 10, doc_length: 30, seed: 1 };
        let a = generate_synthetic(&spec);
        assert_eq!(a.n_docs(), 300);
        assert!(a.n_words() <= 70);
        assert_eq!(a, generate_synthetic(&spec));
        let single = generate_synthetic(&SyntheticSpec { classes: 1, docs_per_class: 10, vocab_per_class: 5, shared_vocab: 0, doc_length: 8, seed: 2 });
        assert_eq!(single.n_classes(), 1);
        assert!(single.n_words() <= 5);
    }

    #[test]
    fn dataset_formats() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("docs.txt"), "good food\nbad food\nmeh\n").unwrap();
        fs::write(dir.path().join("labels.txt"), "pos\nneg\n\n").unwrap();
        let recs = load_dataset(dir.path()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].label, None);
        let tsv = dir.path().join("data.tsv");
        fs::write(&tsv, "pos\tgood food\nneg\tbad food\n").unwrap();
        let recs = load_dataset(&tsv).unwrap();
        assert_eq!(recs[1], LabelledText { label: Some("neg".into()), text: "bad food".into() });
        fs::write(&tsv, "no tab here\n").unwrap();
        assert!(matches!(load_dataset(&tsv), Err(CorpusError::MalformedDataset { .. })));
    }

    #[test]
    fn snapshot_round_trip() {
        let c = balanced(40, 2);
        let s = make_splits(&c, 0.5, 0.1, 9).unwrap();
        let json = serde_json::to_string(&c.snapshot(&s, 9)).unwrap();
        let (c2, s2) = serde_json::from_str::<CorpusSnapshot>(&json).unwrap().into_parts();
        assert_eq!(c, c2);
        assert_eq!(s, s2);
    }

    proptest! {
        #[test]
        fn vocab_round_trip_and_monotone(words in proptest::collection::vec(0u8..12, 1..200), m in 0u64..4) {
            let doc: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            let docs = vec![doc];
            if let Ok(v) = build_vocab(&docs, m) {
                for i in 0..v.len() {
                    prop_assert_eq!(v.id(v.token(i)), Some(i));
                    prop_assert!(v.frequency(i) > m);
                }
                let higher = build_vocab(&docs, m + 1).map(|v| v.len()).unwrap_or(0);
                prop_assert!(higher <= v.len());
            }
        }

        #[test]
        fn splits_partition_and_stratify(
            sizes in proptest::collection::vec(1usize..60, 1..5),
            ratio in 0.05f64..1.0,
            val in 0.0f64..0.5,
            seed in 0u64..1000,
        ) {
            let recs: Vec<LabelledText> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| (0..n).map(move |_| LabelledText { label: Some(format!("c{c}")), text: "w".into() }))
                .collect();
            let corpus = Corpus::from_texts(&recs, TokenizerMode::Pretokenized, 0).unwrap();
            let s = make_splits(&corpus, ratio, val, seed).unwrap();
            let mut all: Vec<usize> = s.train_ids.iter().chain(&s.val_ids).chain(&s.test_ids).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..corpus.n_docs()).collect::<Vec<_>>());

            let total: usize = sizes.iter().sum();
            let n_train = s.train_ids.len();
            let hist = class_histogram(&corpus, &s.train_ids);
            prop_assert_eq!(hist.len(), sizes.len());
            let all_quota_ge_one = sizes.iter().all(|&n| n * n_train >= total);
            if all_quota_ge_one {
                for (c, &n) in sizes.iter().enumerate() {
                    let q = n as f64 * n_train as f64 / total as f64;
                    let got = hist[&c] as f64;
                    prop_assert!(got == q.floor() || got == q.ceil(), "class {} got {} quota {}", c, got, q);
                }
            }
            prop_assert_eq!(&s, &make_splits(&corpus, ratio, val, seed).unwrap());
        }
    }
}
