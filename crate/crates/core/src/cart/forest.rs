//! Randomized forest of tree-architecture models.
//!
//! Each member hides a random subset of the features (they are never asked
//! about) and, for every target dimension it trains on, a random subset of
//! output dimensions (ignored when scoring splits, still averaged in leaves).
//! Member `i` draws its masks from a ChaCha8 stream seeded with the forest
//! seed and stream number `i`, so members are independent of training order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{predict_dt_model, train_with_masks, ArchitectureSpec, DTModel, TrainMasks};
use super::tree::TreeConfig;
use super::CartError;
use crate::corpus::{Corpus, UtteranceRecord};
use crate::Contour;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Fraction of features hidden from each member.
    pub feature_ignore: f64,
    /// Fraction of output dimensions hidden from each member's split scoring.
    pub output_ignore: f64,
    pub seed: u64,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 20,
            feature_ignore: 0.3,
            output_ignore: 0.3,
            seed: 0,
            tree: TreeConfig::default(),
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), CartError> {
        if self.n_trees == 0 {
            return Err(CartError::InvalidConfig("forest needs at least one tree".into()));
        }
        for (name, f) in [("feature_ignore", self.feature_ignore), ("output_ignore", self.output_ignore)] {
            if !(0.0..1.0).contains(&f) {
                return Err(CartError::InvalidConfig(format!("{name} must be in [0, 1), got {f}")));
            }
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestMember {
    /// Sorted indices of the features this member may ask about.
    pub feature_mask: Vec<usize>,
    /// Sorted active output indices, keyed by target dimension.
    pub output_masks: BTreeMap<usize, Vec<usize>>,
    pub model: DTModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub spec: ArchitectureSpec,
    pub members: Vec<ForestMember>,
}

/// Keeps `n - round(fraction * n)` of `0..n` (at least one), sorted.
fn keep_subset(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<usize> {
    let hide = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut keep = idx.split_off(hide);
    keep.sort_unstable();
    keep
}

pub(crate) fn member_masks(
    config: &ForestConfig,
    member: usize,
    n_features: usize,
    dims: impl IntoIterator<Item = usize>,
) -> (Vec<usize>, BTreeMap<usize, Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(member as u64);
    let features = keep_subset(&mut rng, n_features, config.feature_ignore);
    let outputs = dims
        .into_iter()
        .map(|d| (d, keep_subset(&mut rng, d, config.output_ignore)))
        .collect();
    (features, outputs)
}

pub fn train_forest(arch: &ArchitectureSpec, train: &Corpus, config: &ForestConfig) -> Result<Forest, CartError> {
    config.validate()?;
    arch.validate()?;
    if train.schema.len() < 2 {
        return Err(CartError::InvalidConfig("forest needs at least two features".into()));
    }
    let members = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let (feature_mask, output_masks) = member_masks(config, i, train.schema.len(), arch.target_dims());
            let masks = TrainMasks {
                features: Some(feature_mask.clone()),
                outputs: output_masks.clone(),
                fallback_output: None,
            };
            let model = train_with_masks(arch, train, &config.tree, &masks)?;
            Ok(ForestMember {
                feature_mask,
                output_masks,
                model,
            })
        })
        .collect::<Result<Vec<_>, CartError>>()?;
    Ok(Forest { spec: *arch, members })
}

/// Mean of the members' decoded contours.
pub fn predict_forest(forest: &Forest, utterance: &UtteranceRecord) -> Result<Vec<Contour>, CartError> {
    let mut sum = vec![[0.0; crate::CONTOUR_LEN]; utterance.syllables.len()];
    for m in &forest.members {
        for (acc, c) in sum.iter_mut().zip(predict_dt_model(&m.model, utterance)?) {
            for (a, v) in acc.iter_mut().zip(c) {
                *a += v;
            }
        }
    }
    let n = forest.members.len().max(1) as f64;
    for acc in &mut sum {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    Ok(sum)
}
