//! Tree architectures built on [`RegressionTree`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::tree::{train_tree_inner, RegressionTree, Sample, TreeConfig};
use super::CartError;
use crate::contour::{
    dct_decode_n, dct_encode_n, decode_base, encode_sequence, BaseRepr, DeltaKind, EncodedSample,
    RepresentationSpec,
};
use crate::corpus::{Corpus, FeatureSchema, FeatureValue, Level, PhraseSpan, UtteranceRecord};
use crate::{Contour, CONTOUR_LEN};

/// Phrase curves are represented by this many orthonormal DCT coefficients.
pub const PHRASE_DCT_COEFFS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchKind {
    /// One pooled tree (two for ShapeMS: shape and `[mean, std]`).
    SinDT,
    /// One tree (or ShapeMS pair) per tone, plus a pooled fallback.
    ToneDT,
    /// Phrase-level DCT curve tree plus a syllable-level residual tree.
    PSLevel,
    /// One scalar tree per component of the base vector.
    ScalarDT,
}

impl ArchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::SinDT => "sindt",
            ArchKind::ToneDT => "tonedt",
            ArchKind::PSLevel => "pslevel",
            ArchKind::ScalarDT => "scalardt",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sindt" => Ok(ArchKind::SinDT),
            "tonedt" => Ok(ArchKind::ToneDT),
            "pslevel" => Ok(ArchKind::PSLevel),
            "scalardt" => Ok(ArchKind::ScalarDT),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    pub representation: RepresentationSpec,
}

impl ArchitectureSpec {
    pub fn new(kind: ArchKind, representation: RepresentationSpec) -> Result<Self, CartError> {
        let spec = Self { kind, representation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CartError> {
        self.representation.validate()?;
        if self.kind == ArchKind::ScalarDT {
            if self.representation.base == BaseRepr::ShapeMs {
                return Err(CartError::InvalidArchitecture(
                    "ScalarDT needs a plain vector representation (OriF0 or DCT)".into(),
                ));
            }
            if self.representation.delta != DeltaKind::None {
                return Err(CartError::InvalidArchitecture(
                    "ScalarDT predicts scalars independently; a delta block cannot be attached".into(),
                ));
            }
        }
        Ok(())
    }

    /// Target dimensions of every tree this architecture trains.
    pub fn target_dims(&self) -> BTreeSet<usize> {
        let rep = &self.representation;
        let mut dims = BTreeSet::new();
        match (self.kind, rep.base) {
            (ArchKind::ScalarDT, _) => {
                dims.insert(1);
            }
            (_, BaseRepr::ShapeMs) => {
                dims.insert(rep.base_dim() + rep.delta_dim());
                dims.insert(2);
            }
            _ => {
                dims.insert(rep.base_dim() + rep.delta_dim());
            }
        }
        if self.kind == ArchKind::PSLevel {
            dims.insert(PHRASE_DCT_COEFFS);
        }
        dims
    }
}

/// Trees that together predict one syllable-level representation.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeSet {
    /// Target `[v, delta]`.
    Vector(RegressionTree),
    /// Shape tree on `[shape, delta]` and a `[mean, std]` tree.
    Shape {
        shape: RegressionTree,
        meanstd: RegressionTree,
    },
    /// One single-output tree per base component.
    Scalar(Vec<RegressionTree>),
}

impl TreeSet {
    pub fn tree_count(&self) -> usize {
        match self {
            TreeSet::Vector(_) => 1,
            TreeSet::Shape { .. } => 2,
            TreeSet::Scalar(t) => t.len(),
        }
    }

    pub fn trees(&self) -> Vec<&RegressionTree> {
        match self {
            TreeSet::Vector(t) => vec![t],
            TreeSet::Shape { shape, meanstd } => vec![shape, meanstd],
            TreeSet::Scalar(t) => t.iter().collect(),
        }
    }

    /// Decoded contour; any delta block in the leaf means is dropped.
    pub fn predict(&self, rep: &RepresentationSpec, features: &[FeatureValue]) -> Result<Contour, CartError> {
        let d = rep.base_dim();
        let c = match self {
            TreeSet::Vector(t) => decode_base(rep.base, &t.predict(features)[..d], None)?,
            TreeSet::Shape { shape, meanstd } => {
                let ms = meanstd.predict(features);
                decode_base(rep.base, &shape.predict(features)[..d], Some((ms[0], ms[1].max(0.0))))?
            }
            TreeSet::Scalar(trees) => {
                let v: Vec<f64> = trees.iter().map(|t| t.predict(features)[0]).collect();
                decode_base(rep.base, &v, None)?
            }
        };
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelTrees {
    Single(TreeSet),
    PerTone {
        by_tone: BTreeMap<u8, TreeSet>,
        fallback: TreeSet,
    },
    PhraseSyllable {
        phrase: RegressionTree,
        syllable: TreeSet,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DTModel {
    pub spec: ArchitectureSpec,
    pub trees: ModelTrees,
    pub schema: FeatureSchema,
}

impl DTModel {
    pub fn tree_count(&self) -> usize {
        match &self.trees {
            ModelTrees::Single(s) => s.tree_count(),
            ModelTrees::PerTone { by_tone, fallback } => {
                by_tone.values().map(TreeSet::tree_count).sum::<usize>() + fallback.tree_count()
            }
            ModelTrees::PhraseSyllable { syllable, .. } => 1 + syllable.tree_count(),
        }
    }
}

/// Feature and output masks applied while training one model.
#[derive(Debug, Clone, Default)]
pub(crate) struct TrainMasks {
    pub features: Option<Vec<usize>>,
    /// Active outputs per target dimension.
    pub outputs: BTreeMap<usize, Vec<usize>>,
    /// Applied to dimensions missing from `outputs`, indices `>= dim` dropped.
    pub fallback_output: Option<Vec<usize>>,
}

impl TrainMasks {
    fn config_for(&self, base: &TreeConfig, dim: usize, restrict: Option<&[usize]>) -> TreeConfig {
        let mut features = self.features.clone();
        if let Some(r) = restrict {
            features = Some(match features {
                None => r.to_vec(),
                Some(f) => f.into_iter().filter(|i| r.contains(i)).collect(),
            });
        }
        let outputs = self.outputs.get(&dim).cloned().or_else(|| {
            self.fallback_output
                .as_ref()
                .map(|m| m.iter().copied().filter(|&i| i < dim).collect::<Vec<_>>())
                .filter(|m| !m.is_empty())
        });
        TreeConfig {
            min_leaf: base.min_leaf,
            max_depth: base.max_depth,
            active_feature_mask: features,
            active_output_mask: outputs,
        }
    }
}

struct Row<'a> {
    features: &'a [FeatureValue],
    tone: u8,
    encoded: EncodedSample,
}

fn train_treeset(
    schema: &FeatureSchema,
    rows: &[&Row<'_>],
    spec: &ArchitectureSpec,
    masks: &TrainMasks,
    base: &TreeConfig,
) -> Result<TreeSet, CartError> {
    let rep = &spec.representation;
    let train = |targets: Vec<Vec<f64>>| -> Result<RegressionTree, CartError> {
        let dim = targets.first().map_or(0, Vec::len);
        let samples: Vec<Sample<'_>> = rows
            .iter()
            .zip(targets)
            .map(|(r, target)| Sample {
                features: r.features,
                target,
            })
            .collect();
        train_tree_inner(schema, &samples, &masks.config_for(base, dim, None))
    };
    if spec.kind == ArchKind::ScalarDT {
        let trees = (0..rep.base_dim())
            .map(|d| train(rows.iter().map(|r| vec![r.encoded.v[d]]).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TreeSet::Scalar(trees));
    }
    if rep.base == BaseRepr::ShapeMs {
        let shape = train(rows.iter().map(|r| r.encoded.target()).collect())?;
        let meanstd = train(
            rows.iter()
                .map(|r| {
                    let (m, s) = r.encoded.aux.unwrap_or((0.0, 0.0));
                    vec![m, s]
                })
                .collect(),
        )?;
        return Ok(TreeSet::Shape { shape, meanstd });
    }
    Ok(TreeSet::Vector(train(rows.iter().map(|r| r.encoded.target()).collect())?))
}

fn phrase_spans(u: &UtteranceRecord) -> Vec<PhraseSpan> {
    if u.phrases.is_empty() {
        vec![PhraseSpan {
            start: 0,
            end: u.syllables.len(),
        }]
    } else {
        u.phrases.clone()
    }
}

/// Concatenated phrase contour reduced to [`PHRASE_DCT_COEFFS`] coefficients.
pub fn phrase_coefficients(contours: &[Contour]) -> Result<Vec<f64>, CartError> {
    let signal: Vec<f64> = contours.iter().flatten().copied().collect();
    Ok(dct_encode_n(&signal, PHRASE_DCT_COEFFS.min(signal.len()))?)
}

/// Phrase curve for `syllables` syllables, split per syllable.
pub fn phrase_curve(coeffs: &[f64], syllables: usize) -> Result<Vec<Contour>, CartError> {
    let curve = dct_decode_n(coeffs, syllables * CONTOUR_LEN)?;
    Ok(curve
        .chunks(CONTOUR_LEN)
        .map(|c| {
            let mut out = [0.0; CONTOUR_LEN];
            out.copy_from_slice(c);
            out
        })
        .collect())
}

pub fn train_dt_model(arch: &ArchitectureSpec, train: &Corpus, config: &TreeConfig) -> Result<DTModel, CartError> {
    config.validate()?;
    let masks = TrainMasks {
        features: config.active_feature_mask.clone(),
        outputs: BTreeMap::new(),
        fallback_output: config.active_output_mask.clone(),
    };
    train_with_masks(arch, train, config, &masks)
}

pub(crate) fn train_with_masks(
    arch: &ArchitectureSpec,
    train: &Corpus,
    config: &TreeConfig,
    masks: &TrainMasks,
) -> Result<DTModel, CartError> {
    arch.validate()?;
    if train.syllable_count() == 0 {
        return Err(CartError::EmptyCorpus);
    }
    check_rows(&train.schema, train.utterances.iter())?;
    let rep = &arch.representation;
    let schema = &train.schema;

    let trees = if arch.kind == ArchKind::PSLevel {
        let mut phrase_rows: Vec<(&[FeatureValue], Vec<f64>)> = Vec::new();
        let mut rows: Vec<Row<'_>> = Vec::new();
        for u in &train.utterances {
            let contours = u.contours();
            let mut residual = Vec::with_capacity(contours.len());
            for span in phrase_spans(u) {
                let coeffs = phrase_coefficients(&contours[span.start..span.end])?;
                let curve = phrase_curve(&coeffs, span.len())?;
                for (c, p) in contours[span.start..span.end].iter().zip(&curve) {
                    residual.push(std::array::from_fn(|i| c[i] - p[i]));
                }
                phrase_rows.push((&u.syllables[span.start].features, coeffs));
            }
            for (s, encoded) in u.syllables.iter().zip(encode_sequence(rep, &residual)?) {
                rows.push(Row {
                    features: &s.features,
                    tone: s.tone,
                    encoded,
                });
            }
        }
        let phrase_features = schema.indices_at(&[Level::Phrase]);
        let samples: Vec<Sample<'_>> = phrase_rows
            .into_iter()
            .map(|(features, target)| Sample { features, target })
            .collect();
        let phrase = train_tree_inner(
            schema,
            &samples,
            &masks.config_for(config, PHRASE_DCT_COEFFS, Some(&phrase_features)),
        )?;
        let all: Vec<&Row<'_>> = rows.iter().collect();
        ModelTrees::PhraseSyllable {
            phrase,
            syllable: train_treeset(schema, &all, arch, masks, config)?,
        }
    } else {
        let mut rows: Vec<Row<'_>> = Vec::with_capacity(train.syllable_count());
        for u in &train.utterances {
            for (s, encoded) in u.syllables.iter().zip(encode_sequence(rep, &u.contours())?) {
                rows.push(Row {
                    features: &s.features,
                    tone: s.tone,
                    encoded,
                });
            }
        }
        let all: Vec<&Row<'_>> = rows.iter().collect();
        match arch.kind {
            ArchKind::ToneDT => {
                let mut groups: BTreeMap<u8, Vec<&Row<'_>>> = BTreeMap::new();
                for r in &rows {
                    groups.entry(r.tone).or_default().push(r);
                }
                let by_tone = groups
                    .into_iter()
                    .map(|(tone, g)| Ok((tone, train_treeset(schema, &g, arch, masks, config)?)))
                    .collect::<Result<BTreeMap<_, _>, CartError>>()?;
                ModelTrees::PerTone {
                    by_tone,
                    fallback: train_treeset(schema, &all, arch, masks, config)?,
                }
            }
            _ => ModelTrees::Single(train_treeset(schema, &all, arch, masks, config)?),
        }
    };
    Ok(DTModel {
        spec: *arch,
        trees,
        schema: schema.clone(),
    })
}

fn check_rows<'a>(schema: &FeatureSchema, utterances: impl Iterator<Item = &'a UtteranceRecord>) -> Result<(), CartError> {
    for u in utterances {
        for s in &u.syllables {
            if s.features.len() != schema.len() {
                return Err(CartError::FeatureCount {
                    utterance: u.id.clone(),
                    expected: schema.len(),
                    found: s.features.len(),
                });
            }
        }
    }
    Ok(())
}

pub fn predict_dt_model(model: &DTModel, utterance: &UtteranceRecord) -> Result<Vec<Contour>, CartError> {
    check_rows(&model.schema, std::iter::once(utterance))?;
    let rep = &model.spec.representation;
    match &model.trees {
        ModelTrees::Single(set) => utterance
            .syllables
            .iter()
            .map(|s| set.predict(rep, &s.features))
            .collect(),
        ModelTrees::PerTone { by_tone, fallback } => utterance
            .syllables
            .iter()
            .map(|s| by_tone.get(&s.tone).unwrap_or(fallback).predict(rep, &s.features))
            .collect(),
        ModelTrees::PhraseSyllable { phrase, syllable } => {
            let mut out = Vec::with_capacity(utterance.syllables.len());
            for span in phrase_spans(utterance) {
                let coeffs = phrase.predict(&utterance.syllables[span.start].features);
                let curve = phrase_curve(coeffs, span.len())?;
                for (s, p) in utterance.syllables[span.start..span.end].iter().zip(curve) {
                    let r = syllable.predict(rep, &s.features)?;
                    out.push(std::array::from_fn(|i| p[i] + r[i]));
                }
            }
            Ok(out)
        }
    }
}
