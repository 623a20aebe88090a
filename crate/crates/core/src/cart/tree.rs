//! Vector-output CART regression trees.
//!
//! Splits minimize the summed squared error of the two children over the
//! active output dimensions. Questions are categorical equality tests or
//! numeric `<=` thresholds at midpoints between consecutive observed values.
//! Candidates are visited in schema feature order and then by ascending
//! category index or threshold; the first strictly best candidate wins.

use super::CartError;
use crate::corpus::{FeatureKind, FeatureSchema, FeatureValue};

/// Relative SSE reduction below which a split counts as no improvement.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuestionTest {
    /// `value == category`
    Equals(u32),
    /// `value <= threshold`
    AtMost(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Question {
    /// Index into the schema.
    pub feature: usize,
    pub test: QuestionTest,
}

impl Question {
    /// Routes a feature row. A categorical value that does not match (including
    /// an unknown one) or a value of the wrong kind answers "no".
    pub fn answer(&self, features: &[FeatureValue]) -> bool {
        match (self.test, features.get(self.feature)) {
            (QuestionTest::Equals(c), Some(FeatureValue::Cat(v))) => *v == c,
            (QuestionTest::AtMost(t), Some(FeatureValue::Num(x))) => *x <= t,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features that may be asked about; `None` means all.
    pub active_feature_mask: Option<Vec<usize>>,
    /// Target dimensions used for split scoring; `None` means all. Leaves
    /// always store the full-dimension mean.
    pub active_output_mask: Option<Vec<usize>>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            min_leaf: 10,
            max_depth: None,
            active_feature_mask: None,
            active_output_mask: None,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), CartError> {
        if self.min_leaf < 1 {
            return Err(CartError::InvalidConfig("min_leaf must be at least 1".into()));
        }
        if matches!(&self.active_feature_mask, Some(m) if m.is_empty()) {
            return Err(CartError::InvalidConfig("active feature mask is empty".into()));
        }
        if matches!(&self.active_output_mask, Some(m) if m.is_empty()) {
            return Err(CartError::InvalidConfig("active output mask is empty".into()));
        }
        Ok(())
    }
}

/// A training example: a borrowed feature row and its target vector.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub features: &'a [FeatureValue],
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        mean: Vec<f64>,
        count: usize,
        /// SSE of the node's samples over the active outputs.
        impurity: f64,
    },
    Split {
        question: Question,
        yes: usize,
        no: usize,
        count: usize,
        impurity: f64,
    },
}

impl Node {
    pub fn impurity(&self) -> f64 {
        match self {
            Node::Leaf { impurity, .. } | Node::Split { impurity, .. } => *impurity,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Node::Leaf { count, .. } | Node::Split { count, .. } => *count,
        }
    }
}

/// Binary tree stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) target_dim: usize,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>, target_dim: usize) -> Result<Self, CartError> {
        let tree = Self { nodes, target_dim };
        tree.check()?;
        Ok(tree)
    }

    fn check(&self) -> Result<(), CartError> {
        if self.nodes.is_empty() {
            return Err(CartError::MalformedTree("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { mean, .. } if mean.len() != self.target_dim => {
                    return Err(CartError::MalformedTree(format!("leaf {i} has dimension {}", mean.len())));
                }
                Node::Split { yes, no, .. } if *yes <= i || *no <= i || *yes >= self.nodes.len() || *no >= self.nodes.len() => {
                    return Err(CartError::MalformedTree(format!("split {i} has invalid children")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { yes, no, .. } => 1 + go(nodes, *yes).max(go(nodes, *no)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf a feature row reaches.
    pub fn leaf_index(&self, features: &[FeatureValue]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { question, yes, no, .. } => {
                    i = if question.answer(features) { *yes } else { *no };
                }
            }
        }
    }

    pub fn predict(&self, features: &[FeatureValue]) -> &[f64] {
        match &self.nodes[self.leaf_index(features)] {
            Node::Leaf { mean, .. } => mean,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }
}

pub fn predict_tree<'t>(tree: &'t RegressionTree, features: &[FeatureValue]) -> &'t [f64] {
    tree.predict(features)
}

/// Candidate split with its children's SSE.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    question: Question,
    score: f64,
}

struct Workspace<'s, 'a> {
    schema: &'s FeatureSchema,
    samples: &'s [Sample<'a>],
    features: Vec<usize>,
    outputs: Vec<usize>,
    min_leaf: usize,
}

fn sse_from(count: f64, sum: &[f64], sumsq: &[f64]) -> f64 {
    if count == 0.0 {
        return 0.0;
    }
    let s: f64 = sum.iter().zip(sumsq).map(|(s, q)| q - s * s / count).sum();
    s.max(0.0)
}

impl Workspace<'_, '_> {
    /// Targets of `idx` restricted to active outputs and centred on their mean.
    fn centred(&self, idx: &[usize]) -> (Vec<f64>, f64) {
        let a = self.outputs.len();
        let n = idx.len() as f64;
        let mut mean = vec![0.0; a];
        for &i in idx {
            for (m, &o) in mean.iter_mut().zip(&self.outputs) {
                *m += self.samples[i].target[o];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut dev = vec![0.0; idx.len() * a];
        let mut sse = 0.0;
        for (r, &i) in idx.iter().enumerate() {
            for (c, &o) in self.outputs.iter().enumerate() {
                let d = self.samples[i].target[o] - mean[c];
                dev[r * a + c] = d;
                sse += d * d;
            }
        }
        (dev, sse)
    }

    fn best(&self, idx: &[usize]) -> Option<(Candidate, f64)> {
        let n = idx.len();
        if n < 2 * self.min_leaf || self.outputs.is_empty() {
            return None;
        }
        let a = self.outputs.len();
        let (dev, parent_sse) = self.centred(idx);
        let mut total_sum = vec![0.0; a];
        let mut total_sq = vec![0.0; a];
        for r in 0..n {
            for c in 0..a {
                let d = dev[r * a + c];
                total_sum[c] += d;
                total_sq[c] += d * d;
            }
        }

        let mut best: Option<Candidate> = None;
        let mut consider = |question: Question, score: f64| {
            if best.is_none_or(|b| score < b.score) {
                best = Some(Candidate { question, score });
            }
        };
        let mut no_sum = vec![0.0; a];
        let mut no_sq = vec![0.0; a];

        for &f in &self.features {
            match &self.schema.get(f).kind {
                FeatureKind::Categorical(values) => {
                    let v = values.len();
                    let mut cnt = vec![0usize; v];
                    let mut sum = vec![0.0; v * a];
                    let mut sq = vec![0.0; v * a];
                    for (r, &i) in idx.iter().enumerate() {
                        if let Some(FeatureValue::Cat(c)) = self.samples[i].features.get(f) {
                            let c = *c as usize;
                            if c < v {
                                cnt[c] += 1;
                                for k in 0..a {
                                    let d = dev[r * a + k];
                                    sum[c * a + k] += d;
                                    sq[c * a + k] += d * d;
                                }
                            }
                        }
                    }
                    for c in 0..v {
                        let ny = cnt[c];
                        if ny < self.min_leaf || n - ny < self.min_leaf {
                            continue;
                        }
                        let ys = &sum[c * a..(c + 1) * a];
                        let yq = &sq[c * a..(c + 1) * a];
                        for k in 0..a {
                            no_sum[k] = total_sum[k] - ys[k];
                            no_sq[k] = total_sq[k] - yq[k];
                        }
                        let score = sse_from(ny as f64, ys, yq) + sse_from((n - ny) as f64, &no_sum, &no_sq);
                        consider(
                            Question {
                                feature: f,
                                test: QuestionTest::Equals(c as u32),
                            },
                            score,
                        );
                    }
                }
                FeatureKind::Numeric { .. } => {
                    let mut order: Vec<(f64, usize)> = idx
                        .iter()
                        .enumerate()
                        .filter_map(|(r, &i)| self.samples[i].features.get(f).and_then(|v| v.as_num()).map(|x| (x, r)))
                        .collect();
                    if order.len() != n {
                        // rows of the wrong kind always answer "no"; not worth splitting on
                        continue;
                    }
                    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                    let mut ys = vec![0.0; a];
                    let mut yq = vec![0.0; a];
                    for p in 0..n - 1 {
                        let r = order[p].1;
                        for k in 0..a {
                            let d = dev[r * a + k];
                            ys[k] += d;
                            yq[k] += d * d;
                        }
                        let (lo, hi) = (order[p].0, order[p + 1].0);
                        let ny = p + 1;
                        if lo == hi || ny < self.min_leaf || n - ny < self.min_leaf {
                            continue;
                        }
                        let mut t = lo + (hi - lo) / 2.0;
                        if t >= hi {
                            t = lo;
                        }
                        for k in 0..a {
                            no_sum[k] = total_sum[k] - ys[k];
                            no_sq[k] = total_sq[k] - yq[k];
                        }
                        let score = sse_from(ny as f64, &ys, &yq) + sse_from((n - ny) as f64, &no_sum, &no_sq);
                        consider(
                            Question {
                                feature: f,
                                test: QuestionTest::AtMost(t),
                            },
                            score,
                        );
                    }
                }
            }
        }
        let best = best?;
        if parent_sse - best.score > MIN_RELATIVE_GAIN * parent_sse {
            Some((best, parent_sse))
        } else {
            None
        }
    }
}

fn resolve_mask(mask: &Option<Vec<usize>>, len: usize, what: &str) -> Result<Vec<usize>, CartError> {
    match mask {
        None => Ok((0..len).collect()),
        Some(m) => {
            if let Some(bad) = m.iter().find(|&&i| i >= len) {
                return Err(CartError::InvalidConfig(format!("{what} mask index {bad} out of range 0..{len}")));
            }
            let mut m = m.clone();
            m.sort_unstable();
            m.dedup();
            Ok(m)
        }
    }
}

fn target_dim(samples: &[Sample<'_>]) -> Result<usize, CartError> {
    let d = samples.first().ok_or(CartError::EmptySamples)?.target.len();
    if samples.iter().any(|s| s.target.len() != d) {
        return Err(CartError::InconsistentTargets);
    }
    Ok(d)
}

/// Best question for the whole sample set, or `None` if no legal split
/// reduces the impurity.
pub fn best_split(schema: &FeatureSchema, samples: &[Sample<'_>], config: &TreeConfig) -> Result<Option<Question>, CartError> {
    config.validate()?;
    if samples.is_empty() {
        return Ok(None);
    }
    let d = target_dim(samples)?;
    let ws = Workspace {
        schema,
        samples,
        features: resolve_mask(&config.active_feature_mask, schema.len(), "feature")?,
        outputs: resolve_mask(&config.active_output_mask, d, "output")?,
        min_leaf: config.min_leaf,
    };
    let idx: Vec<usize> = (0..samples.len()).collect();
    Ok(ws.best(&idx).map(|(c, _)| c.question))
}

pub fn train_tree(schema: &FeatureSchema, samples: &[Sample<'_>], config: &TreeConfig) -> Result<RegressionTree, CartError> {
    config.validate()?;
    train_tree_inner(schema, samples, config)
}

/// Like [`train_tree`] but accepts an empty feature mask (giving a single
/// leaf); used by the model layer when masks intersect to nothing.
pub(crate) fn train_tree_inner(
    schema: &FeatureSchema,
    samples: &[Sample<'_>],
    config: &TreeConfig,
) -> Result<RegressionTree, CartError> {
    let d = target_dim(samples)?;
    let ws = Workspace {
        schema,
        samples,
        features: resolve_mask(&config.active_feature_mask, schema.len(), "feature")?,
        outputs: resolve_mask(&config.active_output_mask, d, "output")?,
        min_leaf: config.min_leaf.max(1),
    };
    let mut nodes = Vec::new();
    let idx: Vec<usize> = (0..samples.len()).collect();
    grow(&ws, idx, 0, config.max_depth, d, &mut nodes);
    Ok(RegressionTree { nodes, target_dim: d })
}

fn grow(ws: &Workspace<'_, '_>, idx: Vec<usize>, depth: usize, max_depth: Option<usize>, d: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    let split = if max_depth.is_some_and(|m| depth >= m) {
        None
    } else {
        ws.best(&idx)
    };
    match split {
        Some((cand, impurity)) => {
            nodes.push(Node::Leaf {
                mean: Vec::new(),
                count: 0,
                impurity: 0.0,
            });
            let (yes_idx, no_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| cand.question.answer(ws.samples[i].features));
            let count = idx.len();
            drop(idx);
            let yes = grow(ws, yes_idx, depth + 1, max_depth, d, nodes);
            let no = grow(ws, no_idx, depth + 1, max_depth, d, nodes);
            nodes[me] = Node::Split {
                question: cand.question,
                yes,
                no,
                count,
                impurity,
            };
        }
        None => {
            let mut mean = vec![0.0; d];
            for &i in &idx {
                for (m, t) in mean.iter_mut().zip(&ws.samples[i].target) {
                    *m += t;
                }
            }
            mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
            let impurity = if ws.outputs.is_empty() { 0.0 } else { ws.centred(&idx).1 };
            nodes.push(Node::Leaf {
                mean,
                count: idx.len(),
                impurity,
            });
        }
    }
    me
}
