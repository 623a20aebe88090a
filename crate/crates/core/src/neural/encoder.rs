//! Syllable feature rows to network input vectors.
//!
//! Categorical features look up a row of a per-feature embedding table that
//! lives in the model's parameter vector. Each table has one extra row, the
//! unknown slot, used for category indices outside the schema and for
//! categories never seen in training; it starts at zero. Numeric features are
//! z-scored with statistics frozen from the training corpus.

use super::layout::{Layout, TensorId};
use crate::corpus::{Corpus, FeatureKind, FeatureSchema, FeatureValue, Level};

/// Standard deviations below this are replaced by 1 when z-scoring.
const MIN_STD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Embedding {
        feature: usize,
        table: TensorId,
        /// Number of schema categories; row `categories` is the unknown slot.
        categories: usize,
        /// Categories observed in the training corpus.
        seen: Vec<bool>,
    },
    Numeric {
        feature: usize,
        mean: f64,
        std: f64,
    },
}

/// Frozen training statistics of one feature.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotStats {
    /// Categorical: which categories occurred.
    Seen(Vec<bool>),
    /// Numeric: mean and standard deviation.
    MeanStd(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    pub slots: Vec<Slot>,
    pub embed_dim: usize,
}

/// Feature levels of the Additive model's first branch.
pub const SET1_LEVELS: [Level; 3] = [Level::Phone, Level::Syllable, Level::Phrase];
/// Feature levels of the second branch.
pub const SET2_LEVELS: [Level; 2] = [Level::Word, Level::Syllable];
pub const ALL_LEVELS: [Level; 4] = [Level::Phone, Level::Syllable, Level::Word, Level::Phrase];

impl FeatureEncoder {
    /// Builds slots for the features at `levels` with statistics from
    /// `train`, registering embedding tables named `<prefix>.<feature>`.
    pub fn build(prefix: &str, schema: &FeatureSchema, levels: &[Level], embed_dim: usize, train: &Corpus, layout: &mut Layout) -> Self {
        let stats = Self::training_stats(schema, levels, train);
        Self::with_stats(prefix, schema, embed_dim, stats, layout)
    }

    /// Per-feature statistics for the features at `levels`, in schema order.
    pub fn training_stats(schema: &FeatureSchema, levels: &[Level], train: &Corpus) -> Vec<(usize, SlotStats)> {
        let rows: Vec<&[FeatureValue]> = train
            .utterances
            .iter()
            .flat_map(|u| u.syllables.iter().map(|s| s.features.as_slice()))
            .collect();
        schema
            .indices_at(levels)
            .into_iter()
            .map(|feature| {
                let stats = match &schema.get(feature).kind {
                    FeatureKind::Categorical(values) => {
                        let mut seen = vec![false; values.len()];
                        for r in &rows {
                            if let Some(FeatureValue::Cat(c)) = r.get(feature) {
                                if let Some(s) = seen.get_mut(*c as usize) {
                                    *s = true;
                                }
                            }
                        }
                        SlotStats::Seen(seen)
                    }
                    FeatureKind::Numeric { .. } => {
                        let xs: Vec<f64> = rows.iter().filter_map(|r| r.get(feature).and_then(|v| v.as_num())).collect();
                        let (mean, std) = mean_std(&xs);
                        SlotStats::MeanStd(mean, std)
                    }
                };
                (feature, stats)
            })
            .collect()
    }

    /// Builds slots from explicit statistics (used when loading a model).
    pub fn with_stats(prefix: &str, schema: &FeatureSchema, embed_dim: usize, stats: Vec<(usize, SlotStats)>, layout: &mut Layout) -> Self {
        let slots = stats
            .into_iter()
            .map(|(feature, stats)| match stats {
                SlotStats::Seen(seen) => {
                    let categories = seen.len();
                    let table = layout.add(format!("{prefix}.{}", schema.get(feature).name), categories + 1, embed_dim);
                    Slot::Embedding {
                        feature,
                        table,
                        categories,
                        seen,
                    }
                }
                SlotStats::MeanStd(mean, std) => Slot::Numeric { feature, mean, std },
            })
            .collect();
        Self { slots, embed_dim }
    }

    pub fn stats(&self) -> Vec<(usize, SlotStats)> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Embedding { feature, seen, .. } => (*feature, SlotStats::Seen(seen.clone())),
                Slot::Numeric { feature, mean, std } => (*feature, SlotStats::MeanStd(*mean, *std)),
            })
            .collect()
    }

    pub fn tables(&self) -> impl Iterator<Item = TensorId> + '_ {
        self.slots.iter().filter_map(|s| match s {
            Slot::Embedding { table, .. } => Some(*table),
            Slot::Numeric { .. } => None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Embedding { .. } => self.embed_dim,
                Slot::Numeric { .. } => 1,
            })
            .sum()
    }

    /// Table row used for a categorical value.
    pub fn row_for(categories: usize, seen: &[bool], value: Option<&FeatureValue>) -> usize {
        match value {
            Some(FeatureValue::Cat(c)) if (*c as usize) < categories && seen[*c as usize] => *c as usize,
            _ => categories,
        }
    }

    /// Input vector for one syllable.
    pub fn encode(&self, features: &[FeatureValue], layout: &Layout, params: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.input_dim());
        for slot in &self.slots {
            match slot {
                Slot::Embedding {
                    feature,
                    table,
                    categories,
                    seen,
                } => {
                    let row = Self::row_for(*categories, seen, features.get(*feature));
                    let t = layout.slice(params, *table);
                    out.extend_from_slice(&t[row * self.embed_dim..(row + 1) * self.embed_dim]);
                }
                Slot::Numeric { feature, mean, std } => {
                    let x = features.get(*feature).and_then(|v| v.as_num()).unwrap_or(*mean);
                    out.push((x - mean) / std);
                }
            }
        }
        out
    }

    /// Adds `dx` (gradient w.r.t. the encoded row) into the embedding rows
    /// that produced it.
    pub fn backward(&self, features: &[FeatureValue], dx: &[f64], layout: &Layout, grads: &mut [f64]) {
        let mut off = 0;
        for slot in &self.slots {
            match slot {
                Slot::Embedding {
                    feature,
                    table,
                    categories,
                    seen,
                } => {
                    let row = Self::row_for(*categories, seen, features.get(*feature));
                    let g = layout.slice_mut(grads, *table);
                    let e = self.embed_dim;
                    for (gi, d) in g[row * e..(row + 1) * e].iter_mut().zip(&dx[off..off + e]) {
                        *gi += d;
                    }
                    off += e;
                }
                Slot::Numeric { .. } => off += 1,
            }
        }
    }
}

/// Population mean and standard deviation, with std 1 for (near) constant
/// or empty inputs.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 1.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < MIN_STD { 1.0 } else { std })
}
