//! Experiment configuration (JSON or TOML) and per-dataset presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{SyntheticSpec, TokenizerMode};
use crate::embed::{ContextMode, EmbedConfig};
use crate::graph::GraphConfig;
use crate::model::{Activation, AdamConfig, Pooling, StreamMode, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    /// Directory with `docs.txt` + `labels.txt`, or a `label<TAB>text` file.
    pub dataset: Option<PathBuf>,
    /// Generated corpus, used when no dataset path is given.
    pub synthetic: Option<SyntheticSpec>,
    pub tokenizer: TokenizerMode,
    pub min_count: u64,
    pub label_ratio: f64,
    pub val_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            dataset: None,
            synthetic: None,
            tokenizer: TokenizerMode::English,
            min_count: 5,
            label_ratio: 0.01,
            val_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    /// Edge dimensions / streams `T`.
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub noise_exponent: f64,
    pub context: ContextMode,
}

impl Default for EmbedSection {
    fn default() -> Self {
        let d = EmbedConfig::default();
        EmbedSection {
            dim: d.dim,
            window: d.window,
            epochs: d.epochs,
            negatives: d.negatives,
            lr_start: d.lr_start,
            noise_exponent: d.noise_exponent,
            context: d.context,
        }
    }
}

impl EmbedSection {
    pub fn to_config(&self, seed: u64) -> EmbedConfig {
        EmbedConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.epochs,
            negatives: self.negatives,
            lr_start: self.lr_start,
            noise_exponent: self.noise_exponent,
            context: self.context,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// Must equal `embed.dim` when given.
    pub streams: Option<usize>,
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
    pub precision: Precision,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        ModelSection {
            streams: None,
            hidden_per_stream: d.hidden_per_stream,
            hidden_layers: d.hidden_layers,
            pooling: d.pooling,
            mode: d.mode,
            activation: d.activation,
            lr: d.lr,
            dropout: d.dropout,
            max_epochs: d.max_epochs,
            patience: d.patience,
            adam: d.adam,
            precision: Precision::F64,
        }
    }
}

impl ModelSection {
    pub fn to_config(&self, streams: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            streams,
            hidden_per_stream: self.hidden_per_stream,
            hidden_layers: self.hidden_layers,
            pooling: self.pooling,
            mode: self.mode,
            activation: self.activation,
            lr: self.lr,
            dropout: self.dropout,
            max_epochs: self.max_epochs,
            patience: self.patience,
            adam: self.adam,
            seed,
        }
    }
}

/// Settings of the TF-IDF + logistic regression comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { lr: 0.1, epochs: 500, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    /// Seeds `seed..seed + repeats` for repeated evaluation and sweeps.
    pub repeats: usize,
    /// Preset name, `auto` (match the dataset file name) or `none`.
    pub preset: String,
    /// Worker threads for independent sweep runs; a single run is always sequential.
    pub threads: usize,
    pub baseline: BaselineConfig,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: PathBuf::from("runs/default"),
            repeats: 5,
            preset: "auto".into(),
            threads: 1,
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSection,
    pub embed: EmbedSection,
    pub graph: GraphConfig,
    pub model: ModelSection,
    pub run: RunSection,
}

/// Per-dataset stream count, document overlap threshold and pooling, with
/// the reference test accuracy for that dataset at 1% labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub streams: usize,
    pub overlap_threshold: usize,
    pub pooling: Pooling,
    pub reference_accuracy: f64,
}

pub const PRESETS: [Preset; 8] = [
    Preset { name: "20ng", streams: 30, overlap_threshold: 15, pooling: Pooling::Avg, reference_accuracy: 0.2861 },
    Preset { name: "r8", streams: 20, overlap_threshold: 10, pooling: Pooling::Avg, reference_accuracy: 0.8679 },
    Preset { name: "r52", streams: 25, overlap_threshold: 15, pooling: Pooling::Max, reference_accuracy: 0.7828 },
    Preset { name: "ohsumed", streams: 30, overlap_threshold: 5, pooling: Pooling::Avg, reference_accuracy: 0.2740 },
    Preset { name: "mr", streams: 10, overlap_threshold: 5, pooling: Pooling::Max, reference_accuracy: 0.6811 },
    Preset { name: "agnews", streams: 20, overlap_threshold: 5, pooling: Pooling::Avg, reference_accuracy: 0.8043 },
    Preset { name: "twitter", streams: 25, overlap_threshold: 3, pooling: Pooling::Max, reference_accuracy: 0.8232 },
    Preset { name: "waimai", streams: 30, overlap_threshold: 3, pooling: Pooling::Max, reference_accuracy: 0.8393 },
];

/// Looks a preset up by name; case, `-`, `_` and spaces are ignored, and a
/// few common aliases are accepted.
pub fn find_preset(name: &str) -> Option<&'static Preset> {
    let key: String = name.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
    let key = match key.as_str() {
        "20newsgroups" | "20news" => "20ng",
        "twitnltk" | "twitternltk" => "twitter",
        other => other,
    };
    PRESETS.iter().find(|p| p.name == key)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let cfg = if is_json {
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    /// Every default written out explicitly.
    pub fn default_toml() -> String {
        toml::to_string_pretty(&ExperimentConfig::default()).expect("default config serializes")
    }

    pub fn dataset_name(&self) -> String {
        match (&self.corpus.dataset, &self.corpus.synthetic) {
            (Some(p), _) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
            (None, Some(_)) => "synthetic".into(),
            (None, None) => "unspecified".into(),
        }
    }

    /// The preset selected by `run.preset`, if any.
    pub fn preset(&self) -> Result<Option<&'static Preset>, HarnessError> {
        match self.run.preset.as_str() {
            "none" | "" => Ok(None),
            "auto" => Ok(find_preset(&self.dataset_name())),
            name => find_preset(name).map(Some).ok_or_else(|| HarnessError::Config(format!("unknown preset {name:?}"))),
        }
    }

    /// Applies the selected preset (stream count, overlap threshold, pooling).
    pub fn resolved(&self) -> Result<Self, HarnessError> {
        let mut cfg = self.clone();
        if let Some(p) = self.preset()? {
            cfg.embed.dim = p.streams;
            cfg.model.streams = None;
            cfg.graph.overlap_threshold = p.overlap_threshold;
            cfg.model.pooling = p.pooling;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn streams(&self) -> usize {
        self.embed.dim
    }

    pub fn train_config(&self) -> TrainConfig {
        self.model.to_config(self.streams(), self.run.seed)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.embed.dim == 0 {
            return bad("embed.dim must be at least 1".into());
        }
        if let Some(t) = self.model.streams {
            if t != self.embed.dim {
                return bad(format!("model.streams = {t} but embed.dim = {}; both are the edge dimension T", self.embed.dim));
            }
        }
        if self.corpus.dataset.is_none() && self.corpus.synthetic.is_none() {
            return bad("set corpus.dataset or corpus.synthetic".into());
        }
        if !(self.corpus.label_ratio > 0.0 && self.corpus.label_ratio <= 1.0) {
            return bad(format!("corpus.label_ratio {} outside (0, 1]", self.corpus.label_ratio));
        }
        if !(0.0..1.0).contains(&self.corpus.val_fraction) {
            return bad(format!("corpus.val_fraction {} outside [0, 1)", self.corpus.val_fraction));
        }
        if self.run.repeats == 0 {
            return bad("run.repeats must be at least 1".into());
        }
        self.train_config().validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = ExperimentConfig::default_toml();
        for section in ["[corpus]", "[embed]", "[graph]", "[model]", "[run]"] {
            assert!(text.contains(section), "missing {section}");
        }
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, ExperimentConfig::default());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"embed": {"dim": 7}, "run": {"seed": 3}}"#).unwrap();
        assert_eq!(cfg.embed.dim, 7);
        assert_eq!(cfg.embed.window, 5);
        assert_eq!(cfg.model.lr, 0.002);
        assert_eq!(cfg.run.seed, 3);
    }

    #[test]
    fn presets_resolve() {
        let mut cfg = ExperimentConfig::default();
        cfg.corpus.dataset = Some("/data/R8".into());
        let r = cfg.resolved().unwrap();
        assert_eq!((r.embed.dim, r.graph.overlap_threshold, r.model.pooling), (20, 10, Pooling::Avg));
        cfg.corpus.dataset = Some("/data/mine.tsv".into());
        let r = cfg.resolved().unwrap();
        assert_eq!((r.embed.dim, r.graph.overlap_threshold, r.model.pooling), (25, 5, Pooling::Max));
        cfg.run.preset = "twit-nltk".into();
        assert_eq!(cfg.resolved().unwrap().embed.dim, 25);
        cfg.run.preset = "bogus".into();
        assert!(cfg.resolved().is_err());
    }

    #[test]
    fn inconsistent_streams_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.corpus.dataset = Some("x".into());
        cfg.model.streams = Some(10);
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    }
}
