//! Run configuration: a TOML file plus `--set key=value` overrides.
//!
//! ```toml
//! seed = 42
//!
//! [synth]
//! n_utterances = 1000
//! noise_std_hz = 5.0
//!
//! [split]
//! train = 0.8
//!
//! [tree]
//! architecture = "tonedt"
//! representation = "shapems+in-delta"
//!
//! [forest]
//! n_trees = 20
//!
//! [nn]
//! kind = "additive"
//! delta = "in-delta"
//! ```
//!
//! Every key is optional; unknown keys are rejected. Overrides use dotted
//! paths (`synth.noise_std_hz=2.5`) and are parsed as TOML values, falling
//! back to plain strings.

use std::path::Path;

use f0lab::cart::{ArchKind, ArchitectureSpec, ForestConfig, TreeConfig};
use f0lab::contour::{DeltaKind, RepresentationSpec};
use f0lab::corpus::SynthConfig;
use f0lab::neural::{ModelKind, NetDims, TrainConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthSection,
    pub split: SplitSection,
    pub tree: TreeSection,
    pub forest: ForestSection,
    pub nn: NnSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthSection::default(),
            split: SplitSection::default(),
            tree: TreeSection::default(),
            forest: ForestSection::default(),
            nn: NnSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_utterances: usize,
    pub tone_count: u8,
    pub min_syllables: usize,
    pub max_syllables: usize,
    pub min_phrases: usize,
    pub max_phrases: usize,
    pub speaker_mean_hz: f64,
    pub speaker_range_hz: f64,
    pub declination_slope: f64,
    pub emphasis_probability: f64,
    pub noise_std_hz: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_utterances: d.n_utterances,
            tone_count: d.tone_count,
            min_syllables: d.syllables_per_utterance.0,
            max_syllables: d.syllables_per_utterance.1,
            min_phrases: d.phrases_per_utterance.0,
            max_phrases: d.phrases_per_utterance.1,
            speaker_mean_hz: d.speaker_mean_hz,
            speaker_range_hz: d.speaker_range_hz,
            declination_slope: d.declination_slope,
            emphasis_probability: d.emphasis_probability,
            noise_std_hz: d.noise_std_hz,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSection {
    pub architecture: String,
    pub representation: String,
    pub min_leaf: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
}

impl Default for TreeSection {
    fn default() -> Self {
        Self {
            architecture: "tonedt".into(),
            representation: "shapems+in-delta".into(),
            min_leaf: 10,
            max_depth: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub feature_ignore: f64,
    pub output_ignore: f64,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestConfig::default();
        Self {
            n_trees: d.n_trees,
            feature_ignore: d.feature_ignore,
            output_ignore: d.output_ignore,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NnSection {
    pub kind: String,
    pub delta: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub clip_norm: f64,
    pub patience: usize,
    pub lstm_hidden: usize,
    pub mlp_hidden: [usize; 2],
    pub embed_dim: usize,
}

impl Default for NnSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let d = NetDims::default();
        Self {
            kind: "additive".into(),
            delta: "in-delta".into(),
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            clip_norm: t.clip_norm,
            patience: t.patience,
            lstm_hidden: d.lstm_hidden,
            mlp_hidden: d.mlp_hidden,
            embed_dim: d.embed_dim,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses a delta name: `none`, `in-delta` or `cross-delta`.
pub fn parse_delta(s: &str) -> Result<DeltaKind, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "none" => Ok(DeltaKind::None),
        "in-delta" | "indelta" => Ok(DeltaKind::InDelta),
        "cross-delta" | "crossdelta" => Ok(DeltaKind::CrossDelta),
        other => Err(invalid(format!("unknown delta kind {other:?}"))),
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| invalid(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.synth_config(self.seed)?;
        self.ratios()?;
        self.architecture()?;
        self.tree_config()?.validate().map_err(|e| invalid(e.to_string()))?;
        self.forest_config(self.seed)?.validate().map_err(|e| invalid(e.to_string()))?;
        self.model_kind()?;
        self.net_dims()?.validate().map_err(|e| invalid(e.to_string()))?;
        self.train_config(self.seed)?.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn synth_config(&self, seed: u64) -> Result<SynthConfig, CliError> {
        let s = &self.synth;
        let cfg = SynthConfig {
            n_utterances: s.n_utterances,
            tone_count: s.tone_count,
            syllables_per_utterance: (s.min_syllables, s.max_syllables),
            phrases_per_utterance: (s.min_phrases, s.max_phrases),
            speaker_mean_hz: s.speaker_mean_hz,
            speaker_range_hz: s.speaker_range_hz,
            declination_slope: s.declination_slope,
            emphasis_probability: s.emphasis_probability,
            noise_std_hz: s.noise_std_hz,
            seed,
        };
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn ratios(&self) -> Result<(f64, f64, f64), CliError> {
        let r = (self.split.train, self.split.val, self.split.test);
        let ok = [r.0, r.1, r.2].iter().all(|x| x.is_finite() && *x >= 0.0) && (r.0 + r.1 + r.2 - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(invalid(format!("split ratios {r:?} must be non-negative and sum to 1")));
        }
        Ok(r)
    }

    pub fn architecture(&self) -> Result<ArchitectureSpec, CliError> {
        let kind: ArchKind = self.tree.architecture.parse().map_err(invalid)?;
        let rep: RepresentationSpec = self.tree.representation.parse().map_err(invalid)?;
        ArchitectureSpec::new(kind, rep).map_err(|e| invalid(e.to_string()))
    }

    pub fn tree_config(&self) -> Result<TreeConfig, CliError> {
        Ok(TreeConfig {
            min_leaf: self.tree.min_leaf,
            max_depth: (self.tree.max_depth > 0).then_some(self.tree.max_depth),
            ..TreeConfig::default()
        })
    }

    pub fn forest_config(&self, seed: u64) -> Result<ForestConfig, CliError> {
        Ok(ForestConfig {
            n_trees: self.forest.n_trees,
            feature_ignore: self.forest.feature_ignore,
            output_ignore: self.forest.output_ignore,
            seed,
            tree: self.tree_config()?,
        })
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        self.nn.kind.parse().map_err(invalid)
    }

    pub fn net_dims(&self) -> Result<NetDims, CliError> {
        Ok(NetDims {
            lstm_hidden: self.nn.lstm_hidden,
            mlp_hidden: self.nn.mlp_hidden,
            embed_dim: self.nn.embed_dim,
        })
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let n = &self.nn;
        if !(n.learning_rate > 0.0) {
            return Err(invalid("nn.learning_rate must be positive"));
        }
        Ok(TrainConfig {
            learning_rate: n.learning_rate,
            epochs: n.epochs,
            clip_norm: n.clip_norm,
            patience: n.patience,
            delta: parse_delta(&n.delta)?,
            seed,
        })
    }
}

fn apply_override(table: &mut toml::Table, expr: &str) -> Result<(), CliError> {
    let (key, raw) = expr
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {expr:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("path is non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override key {key:?}: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
