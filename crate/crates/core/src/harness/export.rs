//! Per-document vectors from a trained run, as TSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::Deserialize;

use super::HarnessError;
use crate::corpus::CorpusSnapshot;
use crate::graph::{GraphSnapshot, MultiEdgeGraph};
use crate::io::{read_json, write_atomic};
use crate::model::{forward, Checkpoint, Dropout};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportLayer {
    /// Node features fed to the first layer (the document vectors).
    Input,
    /// Concatenated activations of the last hidden layer.
    Hidden,
    /// Pooled pre-softmax scores.
    Output,
}

impl ExportLayer {
    pub fn name(self) -> &'static str {
        match self {
            ExportLayer::Input => "input",
            ExportLayer::Hidden => "hidden",
            ExportLayer::Output => "output",
        }
    }
}

impl FromStr for ExportLayer {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "input" => Ok(ExportLayer::Input),
            "hidden" => Ok(ExportLayer::Hidden),
            "output" => Ok(ExportLayer::Output),
            _ => Err(HarnessError::Config(format!("unknown layer {s:?} (input, hidden, output)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportRow {
    pub doc: usize,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Deserialize)]
struct PrecisionProbe {
    precision: String,
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    read_json(path).map_err(|e| HarnessError::io(path, e))
}

fn layer_values<F: Scalar>(run_dir: &Path, layer: ExportLayer) -> Result<(Array2<F>, usize), HarnessError> {
    let graph: GraphSnapshot<F> = load(&run_dir.join("graph.json"))?;
    let graph = MultiEdgeGraph::try_from(graph).map_err(|e| HarnessError::stage("export", e))?;
    let offset = graph.n_words;
    let values = match layer {
        ExportLayer::Input => graph.node_features.clone(),
        ExportLayer::Hidden | ExportLayer::Output => {
            let ck = Checkpoint::<F>::load(&run_dir.join("checkpoint.json")).map_err(|e| HarnessError::io(run_dir.join("checkpoint.json"), e))?;
            let pass = forward(&graph, &ck.params, &ck.config, Dropout::Off).map_err(|e| HarnessError::stage("export", e))?;
            if layer == ExportLayer::Output {
                pass.logits
            } else {
                pass.last_hidden(ck.config.activation)
                    .ok_or_else(|| HarnessError::Config("model has no hidden layer to export".into()))?
            }
        }
    };
    Ok((values, offset))
}

/// Writes one row per document, `doc:<id> <TAB> label <TAB> values…`, from
/// the artifacts in `run_dir`. Returns the number of rows written.
pub fn export_embeddings(run_dir: &Path, layer: ExportLayer, path: &Path) -> Result<usize, HarnessError> {
    let ck_path = run_dir.join("checkpoint.json");
    if !ck_path.is_file() {
        return Err(HarnessError::MissingCheckpoint(ck_path));
    }
    let corpus: CorpusSnapshot = load(&run_dir.join("corpus.json"))?;
    let probe: PrecisionProbe = load(&ck_path)?;
    let mut out = String::new();
    let rows = corpus.docs.len();
    match probe.precision.as_str() {
        "f32" => write_rows::<f32>(&mut out, run_dir, layer, &corpus)?,
        "f64" => write_rows::<f64>(&mut out, run_dir, layer, &corpus)?,
        other => return Err(HarnessError::Config(format!("unknown checkpoint precision {other:?}"))),
    }
    write_atomic(path, out.as_bytes()).map_err(|e| HarnessError::io(path, e))?;
    Ok(rows)
}

fn write_rows<F: Scalar>(out: &mut String, run_dir: &Path, layer: ExportLayer, corpus: &CorpusSnapshot) -> Result<(), HarnessError> {
    let (values, offset) = layer_values::<F>(run_dir, layer)?;
    writeln!(out, "#layer={}\tdim={}", layer.name(), values.ncols()).unwrap();
    for (d, label) in corpus.labels.iter().enumerate() {
        let label = label.map(|c| corpus.class_names[c].as_str()).unwrap_or("");
        write!(out, "doc:{d}\t{label}").unwrap();
        for v in values.row(offset + d) {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(())
}

/// Parses a file written by [`export_embeddings`].
pub fn read_export(path: &Path) -> Result<Vec<ExportRow>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |line: usize, why: &str| HarnessError::Config(format!("{}:{line}: {why}", path.display()));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, line)| {
            let mut f = line.split('\t');
            let doc = f
                .next()
                .and_then(|k| k.strip_prefix("doc:"))
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| bad(i + 1, "expected doc:<id>"))?;
            let label = f.next().ok_or_else(|| bad(i + 1, "missing label column"))?;
            let values = f.map(|v| v.parse::<f64>().map_err(|_| bad(i + 1, "bad value"))).collect::<Result<_, _>>()?;
            Ok(ExportRow { doc, label: (!label.is_empty()).then(|| label.to_owned()), values })
        })
        .collect()
}
