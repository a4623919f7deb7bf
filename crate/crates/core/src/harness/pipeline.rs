//! Stage-by-stage execution with on-disk caching.
//!
//! Every stage writes its artifact into the run directory and records a
//! fingerprint in `fingerprints.json`. A fingerprint hashes the stage
//! settings together with the fingerprint of the stage before it, so a
//! cached artifact is reused only while everything upstream is unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Precision};
use super::report::{HistorySummary, RunReport};
use super::HarnessError;
use crate::corpus::{class_histogram, generate_synthetic, load_dataset, make_splits, Corpus, CorpusSnapshot, SplitAssignment};
use crate::embed::{
    doc2vec_parameter_count, doc_keys, load_embeddings, train_doc2vec, train_word2vec, word2vec_parameter_count, write_embeddings,
    EmbeddingMatrix,
};
use crate::graph::{build_graph, GraphSnapshot, MultiEdgeGraph};
use crate::io::{read_json, write_atomic, write_json};
use crate::model::{predict, train, Checkpoint, Pooling, Targets};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prepare,
    Embed,
    Graph,
    Train,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Embed => "embed",
            Stage::Graph => "graph",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl FromStr for Stage {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        [Stage::Prepare, Stage::Embed, Stage::Graph, Stage::Train, Stage::Evaluate]
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown stage {s:?}")))
    }
}

/// What the last executed stage produced.
#[derive(Debug, Clone)]
pub struct StageSummary {
    pub stage: Stage,
    pub text: String,
    /// Set once the evaluate stage has run.
    pub report: Option<RunReport>,
}

/// Hex SHA-256 over length-prefixed parts.
pub fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("settings serialize")
}

const MANIFEST: &str = "fingerprints.json";

/// Run directory plus its fingerprint manifest. `dir = None` keeps everything in memory.
struct Workspace {
    dir: Option<PathBuf>,
    manifest: BTreeMap<String, String>,
}

impl Workspace {
    fn open(dir: Option<&Path>) -> Self {
        let manifest = dir.and_then(|d| read_json(&d.join(MANIFEST)).ok()).unwrap_or_default();
        Workspace { dir: dir.map(Path::to_owned), manifest }
    }

    fn path(&self, file: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(file))
    }

    /// True when `stage` was last written with fingerprint `fp` and all its files exist.
    fn is_fresh(&self, stage: Stage, fp: &str, files: &[&str]) -> bool {
        self.dir.is_some()
            && self.manifest.get(stage.name()).is_some_and(|f| f == fp)
            && files.iter().all(|f| self.path(f).is_some_and(|p| p.is_file()))
    }

    fn record(&mut self, stage: Stage, fp: &str) -> Result<(), HarnessError> {
        self.manifest.insert(stage.name().to_owned(), fp.to_owned());
        // later stages are invalid until rewritten
        let later: Vec<String> = self
            .manifest
            .keys()
            .filter(|k| Stage::from_str(k).is_ok_and(|s| s > stage))
            .cloned()
            .collect();
        for k in later {
            self.manifest.remove(&k);
        }
        match self.path(MANIFEST) {
            Some(p) => write_json(&p, &self.manifest).map_err(|e| HarnessError::io(p, e)),
            None => Ok(()),
        }
    }
}

fn dataset_digest(cfg: &ExperimentConfig) -> Result<String, HarnessError> {
    match (&cfg.corpus.dataset, &cfg.corpus.synthetic) {
        (Some(path), _) => {
            let files = if path.is_dir() { vec![path.join("docs.txt"), path.join("labels.txt")] } else { vec![path.clone()] };
            let mut contents = Vec::new();
            for f in &files {
                contents.push(fs::read(f).map_err(|e| HarnessError::io(f, e))?);
            }
            let parts: Vec<&[u8]> = contents.iter().map(Vec::as_slice).collect();
            Ok(fingerprint(&parts))
        }
        (None, Some(spec)) => Ok(fingerprint(&[&json_bytes(spec)])),
        (None, None) => Err(HarnessError::Config("set corpus.dataset or corpus.synthetic".into())),
    }
}

fn build_corpus(cfg: &ExperimentConfig) -> Result<Corpus, HarnessError> {
    let c = &cfg.corpus;
    match (&c.dataset, &c.synthetic) {
        (Some(path), _) => {
            let records = load_dataset(path).map_err(|e| HarnessError::stage("prepare", e))?;
            Corpus::from_texts(&records, c.tokenizer, c.min_count).map_err(|e| HarnessError::stage("prepare", e))
        }
        (None, Some(spec)) => Ok(generate_synthetic(spec)),
        (None, None) => Err(HarnessError::Config("set corpus.dataset or corpus.synthetic".into())),
    }
}

struct Prepared {
    corpus: Corpus,
    splits: SplitAssignment,
    fp: String,
}

fn prepare_stage(cfg: &ExperimentConfig, ws: &mut Workspace) -> Result<Prepared, HarnessError> {
    let seed = cfg.run.seed;
    let mut section = cfg.corpus.clone();
    section.dataset = None;
    let fp = fingerprint(&[b"prepare", &json_bytes(&section), dataset_digest(cfg)?.as_bytes(), &seed.to_le_bytes()]);
    if ws.is_fresh(Stage::Prepare, &fp, &["corpus.json"]) {
        let p = ws.path("corpus.json").expect("fresh implies a directory");
        let snap: CorpusSnapshot = read_json(&p).map_err(|e| HarnessError::io(&p, e))?;
        let (corpus, splits) = snap.into_parts();
        log::info!("prepare: reusing cached corpus");
        return Ok(Prepared { corpus, splits, fp });
    }
    let corpus = build_corpus(cfg)?;
    let splits =
        make_splits(&corpus, cfg.corpus.label_ratio, cfg.corpus.val_fraction, seed).map_err(|e| HarnessError::stage("prepare", e))?;
    if let Some(p) = ws.path("corpus.json") {
        write_json(&p, &corpus.snapshot(&splits, seed)).map_err(|e| HarnessError::io(&p, e))?;
    }
    ws.record(Stage::Prepare, &fp)?;
    Ok(Prepared { corpus, splits, fp })
}

/// Corpus and splits as the prepare stage produces them, cached in `run.out`.
pub fn load_corpus_stage(cfg: &ExperimentConfig) -> Result<(Corpus, SplitAssignment, String), HarnessError> {
    let mut ws = Workspace::open(Some(&cfg.run.out));
    let p = prepare_stage(cfg, &mut ws)?;
    Ok((p.corpus, p.splits, p.fp))
}

fn prepare_text(p: &Prepared) -> String {
    let c = &p.corpus;
    let mut s = format!(
        "corpus: U={} words, K={} docs, C={} classes\nsplits: train {} / val {} / test {}\n",
        c.n_words(),
        c.n_docs(),
        c.n_classes(),
        p.splits.train_ids.len(),
        p.splits.val_ids.len(),
        p.splits.test_ids.len()
    );
    let train = class_histogram(c, &p.splits.train_ids);
    let val = class_histogram(c, &p.splits.val_ids);
    let test = class_histogram(c, &p.splits.test_ids);
    for (k, name) in c.class_names.iter().enumerate() {
        let get = |h: &BTreeMap<usize, usize>| h.get(&k).copied().unwrap_or(0);
        let _ = writeln!(s, "  {name:<20} train {:>5} val {:>5} test {:>6}", get(&train), get(&val), get(&test));
    }
    s
}

struct Embedded<F> {
    words: EmbeddingMatrix<F>,
    docs: EmbeddingMatrix<F>,
    fp: String,
}

fn embed_stage<F: Scalar>(cfg: &ExperimentConfig, prep: &Prepared, ws: &mut Workspace) -> Result<Embedded<F>, HarnessError> {
    let seed = cfg.run.seed;
    let fp = fingerprint(&[b"embed", prep.fp.as_bytes(), &json_bytes(&cfg.embed), &seed.to_le_bytes(), F::NAME.as_bytes()]);
    let word_keys = prep.corpus.vocab.tokens();
    let dkeys = doc_keys(prep.corpus.n_docs());
    let t = cfg.embed.dim;
    if ws.is_fresh(Stage::Embed, &fp, &["words.tsv", "docs.tsv"]) {
        let (wp, dp) = (ws.path("words.tsv").unwrap(), ws.path("docs.tsv").unwrap());
        let words = load_embeddings(&wp, word_keys, t).map_err(|e| HarnessError::stage("embed", e))?;
        let docs = load_embeddings(&dp, &dkeys, t).map_err(|e| HarnessError::stage("embed", e))?;
        log::info!("embed: reusing cached embeddings");
        return Ok(Embedded { words, docs, fp });
    }
    let ecfg = cfg.embed.to_config(seed);
    let words = train_word2vec::<F>(&prep.corpus, &ecfg).map_err(|e| HarnessError::stage("embed", e))?;
    let docs = train_doc2vec::<F>(&prep.corpus, &ecfg).map_err(|e| HarnessError::stage("embed", e))?;
    if let (Some(wp), Some(dp)) = (ws.path("words.tsv"), ws.path("docs.tsv")) {
        write_embeddings(&wp, word_keys, &words).map_err(|e| HarnessError::stage("embed", e))?;
        write_embeddings(&dp, &dkeys, &docs).map_err(|e| HarnessError::stage("embed", e))?;
    }
    ws.record(Stage::Embed, &fp)?;
    Ok(Embedded { words, docs, fp })
}

fn embed_text<F: Scalar>(prep: &Prepared, e: &Embedded<F>) -> String {
    let (u, k, t) = (prep.corpus.n_words(), prep.corpus.n_docs(), e.words.dim());
    format!(
        "word vectors {u} x {t} ({} trainable parameters)\ndoc vectors  {k} x {t} ({} trainable parameters)\nmax row norm words {:.4}, docs {:.4}\n",
        word2vec_parameter_count(u, t),
        doc2vec_parameter_count(u, k, t),
        e.words.max_row_norm(),
        e.docs.max_row_norm()
    )
}

fn graph_stage<F: Scalar>(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    emb: &Embedded<F>,
    ws: &mut Workspace,
) -> Result<(MultiEdgeGraph<F>, String), HarnessError> {
    let fp = fingerprint(&[b"graph", emb.fp.as_bytes(), &json_bytes(&cfg.graph)]);
    if ws.is_fresh(Stage::Graph, &fp, &["graph.json"]) {
        let p = ws.path("graph.json").unwrap();
        let snap: GraphSnapshot<F> = read_json(&p).map_err(|e| HarnessError::io(&p, e))?;
        let g = MultiEdgeGraph::try_from(snap).map_err(|e| HarnessError::stage("graph", e))?;
        log::info!("graph: reusing cached graph");
        return Ok((g, fp));
    }
    let g = build_graph(&prep.corpus, &emb.words, &emb.docs, &cfg.graph).map_err(|e| HarnessError::stage("graph", e))?;
    if let Some(p) = ws.path("graph.json") {
        write_json(&p, &GraphSnapshot::from(&g)).map_err(|e| HarnessError::io(&p, e))?;
    }
    ws.record(Stage::Graph, &fp)?;
    Ok((g, fp))
}

/// Training targets for labelled documents; document `d` is node `U + d`.
pub fn targets_from_splits(corpus: &Corpus, splits: &SplitAssignment) -> Targets {
    let u = corpus.n_words();
    let pick = |ids: &[usize]| ids.iter().filter_map(|&d| corpus.docs[d].label.map(|c| (u + d, c))).collect();
    Targets { train: pick(&splits.train_ids), val: pick(&splits.val_ids) }
}

fn train_stage<F: Scalar>(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    graph: &MultiEdgeGraph<F>,
    graph_fp: &str,
    ws: &mut Workspace,
) -> Result<(Checkpoint<F>, String), HarnessError> {
    let tcfg = cfg.train_config();
    let fp = fingerprint(&[b"train", graph_fp.as_bytes(), &json_bytes(&tcfg)]);
    if ws.is_fresh(Stage::Train, &fp, &["checkpoint.json"]) {
        let p = ws.path("checkpoint.json").unwrap();
        let ck = Checkpoint::<F>::load(&p).map_err(|e| HarnessError::io(&p, e))?;
        log::info!("train: reusing cached checkpoint");
        return Ok((ck, fp));
    }
    let targets = targets_from_splits(&prep.corpus, &prep.splits);
    let outcome = train(graph, &targets, prep.corpus.n_classes(), &tcfg).map_err(|e| HarnessError::stage("train", e))?;
    let ck = Checkpoint::new(tcfg, prep.corpus.n_classes(), outcome);
    if let Some(p) = ws.path("checkpoint.json") {
        ck.save(&p).map_err(|e| HarnessError::io(&p, e))?;
    }
    ws.record(Stage::Train, &fp)?;
    Ok((ck, fp))
}

fn train_text<F: Scalar>(ck: &Checkpoint<F>) -> String {
    let h = HistorySummary::from(&ck.history);
    format!(
        "{} epochs, best epoch {} (val loss {:.6}, val acc {:.4}), stopped by {:?}; {} parameters\n",
        h.epochs_run,
        h.best_epoch,
        h.best_val_loss,
        h.best_val_accuracy,
        h.stop_reason,
        ck.params.parameter_count()
    )
}

/// Scores a trained model on every split.
pub fn evaluate_model<F: Scalar>(
    corpus: &Corpus,
    splits: &SplitAssignment,
    graph: &MultiEdgeGraph<F>,
    ck: &Checkpoint<F>,
) -> Result<RunReport, HarnessError> {
    let nodes: Vec<usize> = (0..corpus.n_docs()).map(|d| graph.doc_node(d)).collect();
    let preds = predict(graph, &ck.params, &ck.config, &nodes).map_err(|e| HarnessError::stage("evaluate", e))?;
    let predicted: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let mut report = RunReport::from_predictions("me-gcn", corpus, splits, &predicted);
    report.history = Some(HistorySummary::from(&ck.history));
    report.parameter_count = ck.params.parameter_count();
    Ok(report)
}

fn execute<F: Scalar>(cfg: &ExperimentConfig, ws: &mut Workspace, until: Stage) -> Result<StageSummary, HarnessError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_owned(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let prep = prepare_stage(cfg, ws)?;
    lap("prepare", &mut timings);
    if until == Stage::Prepare {
        return Ok(StageSummary { stage: until, text: prepare_text(&prep), report: None });
    }
    let emb = embed_stage::<F>(cfg, &prep, ws)?;
    lap("embed", &mut timings);
    if until == Stage::Embed {
        return Ok(StageSummary { stage: until, text: embed_text(&prep, &emb), report: None });
    }
    let (graph, graph_fp) = graph_stage(cfg, &prep, &emb, ws)?;
    lap("graph", &mut timings);
    if until == Stage::Graph {
        return Ok(StageSummary { stage: until, text: graph.stats().to_string(), report: None });
    }
    let (ck, train_fp) = train_stage(cfg, &prep, &graph, &graph_fp, ws)?;
    lap("train", &mut timings);
    if until == Stage::Train {
        return Ok(StageSummary { stage: until, text: train_text(&ck), report: None });
    }
    let mut report = evaluate_model(&prep.corpus, &prep.splits, &graph, &ck)?;
    lap("evaluate", &mut timings);
    annotate::<F>(&mut report, cfg, train_fp)?;
    report.timings = timings;
    if let Some(dir) = &ws.dir {
        let write = |file: &str, bytes: &[u8]| write_atomic(&dir.join(file), bytes).map_err(|e| HarnessError::io(dir.join(file), e));
        write("report.json", &json_bytes_pretty(&report))?;
        write("report.txt", report.to_string().as_bytes())?;
        let timing_map: BTreeMap<&str, f64> = report.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        write("timings.json", &json_bytes_pretty(&timing_map))?;
    }
    Ok(StageSummary { stage: Stage::Evaluate, text: report.to_string(), report: Some(report) })
}

fn annotate<F: Scalar>(report: &mut RunReport, cfg: &ExperimentConfig, fp: String) -> Result<(), HarnessError> {
    report.dataset = cfg.dataset_name();
    report.seed = cfg.run.seed;
    report.fingerprint = fp;
    report.reference_accuracy = cfg.preset()?.map(|p| p.reference_accuracy);
    report.settings = serde_json::json!({
        "streams": cfg.streams(),
        "overlap_threshold": cfg.graph.overlap_threshold,
        "pooling": cfg.model.pooling,
        "mode": cfg.model.mode,
        "precision": F::NAME,
    });
    Ok(())
}

fn execute_cell<F: Scalar>(cfg: &ExperimentConfig, thresholds: &[usize], poolings: &[Pooling]) -> Result<Vec<RunReport>, HarnessError> {
    let mut ws = Workspace::open(None);
    let prep = prepare_stage(cfg, &mut ws)?;
    let emb = embed_stage::<F>(cfg, &prep, &mut ws)?;
    let mut reports = Vec::with_capacity(thresholds.len() * poolings.len());
    for &u in thresholds {
        let mut gcfg = cfg.clone();
        gcfg.graph.overlap_threshold = u;
        let (graph, graph_fp) = graph_stage(&gcfg, &prep, &emb, &mut ws)?;
        for &pooling in poolings {
            let mut mcfg = gcfg.clone();
            mcfg.model.pooling = pooling;
            let (ck, fp) = train_stage(&mcfg, &prep, &graph, &graph_fp, &mut ws)?;
            let mut report = evaluate_model(&prep.corpus, &prep.splits, &graph, &ck)?;
            annotate::<F>(&mut report, &mcfg, fp)?;
            reports.push(report);
        }
    }
    Ok(reports)
}

/// In-memory runs of every `(threshold, pooling)` pair sharing one corpus
/// and embedding; reports come back threshold-major. `cfg` is used as given
/// (no preset is applied).
pub(crate) fn run_grid_cell(cfg: &ExperimentConfig, thresholds: &[usize], poolings: &[Pooling]) -> Result<Vec<RunReport>, HarnessError> {
    cfg.validate()?;
    match cfg.model.precision {
        Precision::F32 => execute_cell::<f32>(cfg, thresholds, poolings),
        Precision::F64 => execute_cell::<f64>(cfg, thresholds, poolings),
    }
}

fn json_bytes_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("report serializes")
}

fn dispatch(cfg: &ExperimentConfig, dir: Option<&Path>, until: Stage) -> Result<StageSummary, HarnessError> {
    let cfg = cfg.resolved()?;
    let mut ws = Workspace::open(dir);
    match cfg.model.precision {
        Precision::F32 => execute::<f32>(&cfg, &mut ws, until),
        Precision::F64 => execute::<f64>(&cfg, &mut ws, until),
    }
}

/// Runs stages up to and including `until` in `run.out`, reusing cached artifacts.
pub fn run_until(cfg: &ExperimentConfig, until: Stage) -> Result<StageSummary, HarnessError> {
    dispatch(cfg, Some(&cfg.run.out), until)
}

/// Full pipeline in `run.out`.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    Ok(run_until(cfg, Stage::Evaluate)?.report.expect("evaluate produces a report"))
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub test_accuracy: Vec<f64>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub best_test_accuracy: f64,
    pub reports: Vec<RunReport>,
}

impl RepeatSummary {
    pub fn from_reports(reports: Vec<RunReport>) -> Self {
        let acc: Vec<f64> = reports.iter().map(|r| r.test_accuracy).collect();
        let n = acc.len().max(1) as f64;
        let mean = acc.iter().sum::<f64>() / n;
        let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        RepeatSummary {
            seeds: reports.iter().map(|r| r.seed).collect(),
            mean_test_accuracy: mean,
            std_test_accuracy: var.sqrt(),
            best_test_accuracy: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            test_accuracy: acc,
            reports,
        }
    }
}

/// Runs seeds `run.seed .. run.seed + run.repeats`, each in `run.out/seed-<s>`.
pub fn run_repeats(cfg: &ExperimentConfig) -> Result<RepeatSummary, HarnessError> {
    let base = cfg.run.seed;
    let seeds: Vec<u64> = (0..cfg.run.repeats as u64).map(|i| base + i).collect();
    let pool = thread_pool(cfg.run.threads)?;
    let reports = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let mut c = cfg.clone();
                c.run.seed = s;
                c.run.out = cfg.run.out.join(format!("seed-{s}"));
                run_pipeline(&c)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = RepeatSummary::from_reports(reports);
    let p = cfg.run.out.join("repeats.json");
    write_json(&p, &summary).map_err(|e| HarnessError::io(&p, e))?;
    Ok(summary)
}
