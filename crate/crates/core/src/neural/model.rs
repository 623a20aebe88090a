//! Network assembly, forward pass, loss and exact gradients.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoder::{FeatureEncoder, SlotStats, ALL_LEVELS, SET1_LEVELS, SET2_LEVELS};
use super::layers::{Activation, Dense, LstmCell, LstmGrads, LstmStep};
use super::layout::{Layout, TensorId};
use super::NnError;
use crate::contour::DeltaKind;
use crate::corpus::{Corpus, FeatureSchema, UtteranceRecord};
use crate::{Contour, CONTOUR_LEN};

/// Contours are divided by this before entering the loss.
pub const TARGET_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Per-syllable MLP on all features.
    Mlp,
    /// Unidirectional LSTM and an MLP head on all features.
    Lstm,
    /// BLSTM and an MLP head on all features.
    Blstm,
    /// Base branch plus residual branch.
    Additive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mlp, ModelKind::Lstm, ModelKind::Blstm, ModelKind::Additive];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
            ModelKind::Blstm => "blstm",
            ModelKind::Additive => "additive",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            "blstm" => Ok(ModelKind::Blstm),
            "additive" | "additive-blstm" => Ok(ModelKind::Additive),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    /// LSTM hidden size (per direction for BLSTMs).
    pub lstm_hidden: usize,
    pub mlp_hidden: [usize; 2],
    pub embed_dim: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        Self {
            lstm_hidden: 64,
            mlp_hidden: [128, 64],
            embed_dim: 16,
        }
    }
}

impl NetDims {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.lstm_hidden == 0 || self.mlp_hidden.contains(&0) || self.embed_dim == 0 {
            return Err(NnError::InvalidConfig("network sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DenseIds {
    w: TensorId,
    b: TensorId,
    input: usize,
    output: usize,
    act: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LstmIds {
    wx: TensorId,
    wh: TensorId,
    b: TensorId,
    input: usize,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Direct,
    Lstm(LstmIds),
    Blstm(LstmIds, LstmIds),
}

#[derive(Debug, Clone, PartialEq)]
struct Branch {
    encoder: FeatureEncoder,
    body: Body,
    head: [DenseIds; 3],
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Uniform(f64),
    Embedding,
    LstmBias(usize),
    Constant(f64),
    Zero,
}

const RELU_BIAS: f64 = 0.01;

/// A trained or freshly initialized network. Parameters live in one flat
/// vector described by [`NeuralModel::layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub kind: ModelKind,
    pub dims: NetDims,
    pub schema: FeatureSchema,
    pub params: Vec<f64>,
    layout: Layout,
    branches: Vec<Branch>,
}

/// Base, residual and total contours (Hz) with the delta block of the total.
/// Single-path models put their output in `base` and zeros in `residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub base: Vec<Contour>,
    pub residual: Vec<Contour>,
    pub total: Vec<Contour>,
    pub delta: Vec<Vec<f64>>,
}

struct Builder {
    layout: Layout,
    inits: Vec<(TensorId, Init)>,
}

impl Builder {
    fn dense(&mut self, name: &str, input: usize, output: usize, act: Activation) -> DenseIds {
        let w = self.layout.add(format!("{name}.w"), output, input);
        let b = self.layout.add(format!("{name}.b"), output, 1);
        self.inits.push((w, Init::Uniform(1.0 / (input.max(1) as f64).sqrt())));
        // a small positive ReLU bias keeps units off the kink when inputs die
        let bias = if act == Activation::Relu { Init::Constant(RELU_BIAS) } else { Init::Zero };
        self.inits.push((b, bias));
        DenseIds {
            w,
            b,
            input,
            output,
            act,
        }
    }

    fn lstm(&mut self, name: &str, input: usize, hidden: usize) -> LstmIds {
        let wx = self.layout.add(format!("{name}.wx"), 4 * hidden, input);
        let wh = self.layout.add(format!("{name}.wh"), 4 * hidden, hidden);
        let b = self.layout.add(format!("{name}.b"), 4 * hidden, 1);
        let s = 1.0 / ((input + hidden) as f64).sqrt();
        self.inits.push((wx, Init::Uniform(s)));
        self.inits.push((wh, Init::Uniform(s)));
        self.inits.push((b, Init::LstmBias(hidden)));
        LstmIds {
            wx,
            wh,
            b,
            input,
            hidden,
        }
    }

    /// `tag` is "" for single-path models and "1"/"2" for the additive
    /// branches; tensor names carry it (`blstm1.fwd.wx`, `mlp2.out.b`).
    fn branch(&mut self, tag: &str, body: ModelKind, encoder: FeatureEncoder, dims: &NetDims, act: Activation) -> Branch {
        for t in encoder.tables() {
            self.inits.push((t, Init::Embedding));
        }
        let input = encoder.input_dim();
        let h = dims.lstm_hidden;
        let (body, head_in) = match body {
            ModelKind::Mlp => (Body::Direct, input),
            ModelKind::Lstm => (Body::Lstm(self.lstm(&format!("lstm{tag}"), input, h)), h),
            ModelKind::Blstm | ModelKind::Additive => {
                let f = self.lstm(&format!("blstm{tag}.fwd"), input, h);
                let b = self.lstm(&format!("blstm{tag}.bwd"), input, h);
                (Body::Blstm(f, b), 2 * h)
            }
        };
        let head_name = format!("mlp{tag}");
        let [h1, h2] = dims.mlp_hidden;
        let head = [
            self.dense(&format!("{head_name}.l0"), head_in, h1, act),
            self.dense(&format!("{head_name}.l1"), h1, h2, act),
            self.dense(&format!("{head_name}.out"), h2, CONTOUR_LEN, Activation::Identity),
        ];
        Branch { encoder, body, head }
    }
}

struct Structure {
    layout: Layout,
    branches: Vec<Branch>,
    inits: Vec<(TensorId, Init)>,
}

/// Encoder statistics per branch, in branch order.
pub type EncoderStats = Vec<Vec<(usize, SlotStats)>>;

fn assemble(kind: ModelKind, dims: &NetDims, schema: &FeatureSchema, stats: EncoderStats) -> Result<Structure, NnError> {
    let mut b = Builder {
        layout: Layout::default(),
        inits: Vec::new(),
    };
    let expected = if kind == ModelKind::Additive { 2 } else { 1 };
    if stats.len() != expected {
        return Err(NnError::InvalidConfig(format!("{kind} needs {expected} feature encoders, got {}", stats.len())));
    }
    let mut stats = stats.into_iter();
    let branches = if kind == ModelKind::Additive {
        let e1 = FeatureEncoder::with_stats("enc1", schema, dims.embed_dim, stats.next().unwrap_or_default(), &mut b.layout);
        let b1 = b.branch("1", kind, e1, dims, Activation::Relu);
        let e2 = FeatureEncoder::with_stats("enc2", schema, dims.embed_dim, stats.next().unwrap_or_default(), &mut b.layout);
        let b2 = b.branch("2", kind, e2, dims, Activation::Tanh);
        vec![b1, b2]
    } else {
        let e = FeatureEncoder::with_stats("enc", schema, dims.embed_dim, stats.next().unwrap_or_default(), &mut b.layout);
        vec![b.branch("", kind, e, dims, Activation::Relu)]
    };
    Ok(Structure {
        layout: b.layout,
        branches,
        inits: b.inits,
    })
}

impl NeuralModel {
    /// Fresh model with encoder statistics from `train` and parameters drawn
    /// from `seed`. The base head's output bias starts at the mean training
    /// contour.
    pub fn new(kind: ModelKind, dims: NetDims, train: &Corpus, seed: u64) -> Result<Self, NnError> {
        dims.validate()?;
        if train.syllable_count() == 0 {
            return Err(NnError::EmptyCorpus);
        }
        let levels: Vec<&[crate::corpus::Level]> = if kind == ModelKind::Additive {
            vec![&SET1_LEVELS, &SET2_LEVELS]
        } else {
            vec![&ALL_LEVELS]
        };
        let stats = levels
            .into_iter()
            .map(|l| FeatureEncoder::training_stats(&train.schema, l, train))
            .collect();
        let s = assemble(kind, &dims, &train.schema, stats)?;
        let mut params = vec![0.0; s.layout.size()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (id, init) in &s.inits {
            let spec = s.layout.get(*id);
            let p = &mut params[spec.range()];
            match *init {
                Init::Uniform(a) => p.iter_mut().for_each(|v| *v = rng.random_range(-a..a)),
                Init::Embedding => {
                    let known = (spec.rows - 1) * spec.cols;
                    p[..known].iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
                }
                Init::LstmBias(h) => p[h..2 * h].iter_mut().for_each(|v| *v = 1.0),
                Init::Constant(c) => p.iter_mut().for_each(|v| *v = c),
                Init::Zero => {}
            }
        }
        let n = train.syllable_count() as f64;
        let out_b = s.branches[0].head[2].b;
        let bias = s.layout.slice_mut(&mut params, out_b);
        for u in &train.utterances {
            for syl in &u.syllables {
                for (b, v) in bias.iter_mut().zip(syl.contour) {
                    *b += v / TARGET_SCALE / n;
                }
            }
        }
        Ok(Self {
            kind,
            dims,
            schema: train.schema.clone(),
            params,
            layout: s.layout,
            branches: s.branches,
        })
    }

    /// Rebuilds a model from stored parts; `params` must match the layout.
    pub fn from_parts(kind: ModelKind, dims: NetDims, schema: FeatureSchema, stats: EncoderStats, params: Vec<f64>) -> Result<Self, NnError> {
        dims.validate()?;
        let s = assemble(kind, &dims, &schema, stats)?;
        if params.len() != s.layout.size() {
            return Err(NnError::InvalidConfig(format!(
                "expected {} parameters, found {}",
                s.layout.size(),
                params.len()
            )));
        }
        Ok(Self {
            kind,
            dims,
            schema,
            params,
            layout: s.layout,
            branches: s.branches,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn encoder_stats(&self) -> EncoderStats {
        self.branches.iter().map(|b| b.encoder.stats()).collect()
    }

    /// Encoded input rows of branch `branch` (0 for single-path models).
    pub fn encode(&self, branch: usize, utterance: &UtteranceRecord) -> Vec<Vec<f64>> {
        let enc = &self.branches[branch].encoder;
        utterance
            .syllables
            .iter()
            .map(|s| enc.encode(&s.features, &self.layout, &self.params))
            .collect()
    }

    /// Named tensor view of the parameters.
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.find(name).map(|t| &self.params[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.find(name)?.range();
        Some(&mut self.params[range])
    }

    fn check(&self, utterance: &UtteranceRecord) -> Result<(), NnError> {
        if utterance.syllables.is_empty() {
            return Err(NnError::EmptySequence);
        }
        for s in &utterance.syllables {
            if s.features.len() != self.schema.len() {
                return Err(NnError::FeatureCount {
                    utterance: utterance.id.clone(),
                    expected: self.schema.len(),
                    found: s.features.len(),
                });
            }
        }
        Ok(())
    }

    fn dense(&self, ids: &DenseIds) -> Dense<'_> {
        Dense {
            w: self.layout.slice(&self.params, ids.w),
            b: self.layout.slice(&self.params, ids.b),
            input: ids.input,
            output: ids.output,
            act: ids.act,
        }
    }

    fn cell(&self, ids: &LstmIds) -> LstmCell<'_> {
        LstmCell {
            wx: self.layout.slice(&self.params, ids.wx),
            wh: self.layout.slice(&self.params, ids.wh),
            b: self.layout.slice(&self.params, ids.b),
            input: ids.input,
            hidden: ids.hidden,
        }
    }

    fn forward_branch(&self, branch: &Branch, utterance: &UtteranceRecord) -> BranchCache {
        let xs: Vec<Vec<f64>> = utterance
            .syllables
            .iter()
            .map(|s| branch.encoder.encode(&s.features, &self.layout, &self.params))
            .collect();
        let (body, head_in) = match &branch.body {
            Body::Direct => (BodyCache::Direct, xs.clone()),
            Body::Lstm(ids) => {
                let steps = self.cell(ids).run(&xs, false);
                let h = steps.iter().map(|s| s.h.clone()).collect();
                (BodyCache::Lstm(steps), h)
            }
            Body::Blstm(f, b) => {
                let fs = self.cell(f).run(&xs, false);
                let bs = self.cell(b).run(&xs, true);
                let h = fs.iter().zip(&bs).map(|(a, b)| [a.h.as_slice(), b.h.as_slice()].concat()).collect();
                (BodyCache::Blstm(fs, bs), h)
            }
        };
        let mut acts = vec![head_in];
        for ids in &branch.head {
            let layer = self.dense(ids);
            let next = acts.last().map(|a| a.iter().map(|x| layer.forward(x)).collect()).unwrap_or_default();
            acts.push(next);
        }
        BranchCache { xs, body, acts }
    }

    /// Branch outputs in scaled units.
    fn forward_cached(&self, utterance: &UtteranceRecord) -> Vec<BranchCache> {
        self.branches.iter().map(|b| self.forward_branch(b, utterance)).collect()
    }

    fn backward_branch(&self, branch: &Branch, cache: &BranchCache, dout: &[Contour], utterance: &UtteranceRecord, grads: &mut [f64]) {
        let n = dout.len();
        let mut upstream: Vec<Vec<f64>> = dout.iter().map(|d| d.to_vec()).collect();
        for (l, ids) in branch.head.iter().enumerate().rev() {
            let layer = self.dense(ids);
            let (dw, db) = pair_mut(&self.layout, grads, ids.w, ids.b);
            upstream = (0..n)
                .map(|t| layer.backward(&cache.acts[l][t], &cache.acts[l + 1][t], &upstream[t], dw, db))
                .collect();
        }
        let mut dxs = vec![vec![0.0; branch.encoder.input_dim()]; n];
        match (&branch.body, &cache.body) {
            (Body::Direct, BodyCache::Direct) => dxs = upstream,
            (Body::Lstm(ids), BodyCache::Lstm(steps)) => {
                let mut g = lstm_grads(&self.layout, grads, ids);
                self.cell(ids).backward(&cache.xs, steps, &upstream, false, &mut g, &mut dxs);
            }
            (Body::Blstm(f, b), BodyCache::Blstm(fs, bs)) => {
                let h = f.hidden;
                let dh_f: Vec<Vec<f64>> = upstream.iter().map(|d| d[..h].to_vec()).collect();
                let dh_b: Vec<Vec<f64>> = upstream.iter().map(|d| d[h..].to_vec()).collect();
                {
                    let mut g = lstm_grads(&self.layout, grads, f);
                    self.cell(f).backward(&cache.xs, fs, &dh_f, false, &mut g, &mut dxs);
                }
                let mut g = lstm_grads(&self.layout, grads, b);
                self.cell(b).backward(&cache.xs, bs, &dh_b, true, &mut g, &mut dxs);
            }
            _ => unreachable!("cache built from the same body"),
        }
        for (s, dx) in utterance.syllables.iter().zip(&dxs) {
            branch.encoder.backward(&s.features, dx, &self.layout, grads);
        }
    }

    /// Base/residual/total contours in Hz and the delta block of the total.
    pub fn forward(&self, utterance: &UtteranceRecord, delta: DeltaKind) -> Result<PredictionBundle, NnError> {
        self.check(utterance)?;
        let caches = self.forward_cached(utterance);
        let to_hz = |c: &BranchCache| -> Vec<Contour> {
            c.output()
                .iter()
                .map(|o| std::array::from_fn(|i| o[i] * TARGET_SCALE))
                .collect()
        };
        let base = to_hz(&caches[0]);
        let residual = match caches.get(1) {
            Some(c) => to_hz(c),
            None => vec![[0.0; CONTOUR_LEN]; base.len()],
        };
        let total: Vec<Contour> = base
            .iter()
            .zip(&residual)
            .map(|(b, r)| std::array::from_fn(|i| b[i] + r[i]))
            .collect();
        let delta = delta_blocks(&total, delta);
        Ok(PredictionBundle {
            base,
            residual,
            total,
            delta,
        })
    }

    /// Scaled totals, without building a bundle.
    fn total_scaled(&self, caches: &[BranchCache]) -> Vec<Contour> {
        let n = caches[0].output().len();
        (0..n)
            .map(|t| std::array::from_fn(|i| caches.iter().map(|c| c.output()[t][i]).sum()))
            .collect()
    }

    /// Loss of the model on `utterances` (see [`loss_with_delta`]).
    pub fn loss(&self, utterances: &[&UtteranceRecord], delta: DeltaKind) -> Result<f64, NnError> {
        let (sse, count) = self.sse(utterances, delta)?;
        Ok(sse / count as f64)
    }

    /// Summed squared error (scaled units) and number of value components.
    pub(crate) fn sse(&self, utterances: &[&UtteranceRecord], delta: DeltaKind) -> Result<(f64, usize), NnError> {
        let mut sse = 0.0;
        let mut count = 0;
        for u in utterances {
            self.check(u)?;
            let pred = self.total_scaled(&self.forward_cached(u));
            let truth = scaled_truth(u);
            sse += sse_and_grad(&pred, &truth, delta, None);
            count += u.syllables.len() * CONTOUR_LEN;
        }
        Ok((sse, count))
    }

    /// Smallest `|z|` over all ReLU pre-activations on `utterances`. Finite
    /// differences are only meaningful when this exceeds the step's effect
    /// on `z`.
    pub fn relu_margin(&self, utterances: &[&UtteranceRecord]) -> f64 {
        let mut margin = f64::INFINITY;
        for u in utterances {
            for (branch, cache) in self.branches.iter().zip(self.forward_cached(u)) {
                for (l, ids) in branch.head.iter().enumerate() {
                    if ids.act != Activation::Relu {
                        continue;
                    }
                    let linear = Dense {
                        act: Activation::Identity,
                        ..self.dense(ids)
                    };
                    for x in &cache.acts[l] {
                        for z in linear.forward(x) {
                            margin = margin.min(z.abs());
                        }
                    }
                }
            }
        }
        margin
    }

    /// Adds `d(scale * sse)/dθ` for one utterance into `grads`; returns the
    /// utterance's unscaled SSE.
    pub(crate) fn accumulate_gradients(&self, utterance: &UtteranceRecord, delta: DeltaKind, scale: f64, grads: &mut [f64]) -> Result<f64, NnError> {
        self.check(utterance)?;
        let caches = self.forward_cached(utterance);
        let pred = self.total_scaled(&caches);
        let truth = scaled_truth(utterance);
        let mut dpred = vec![[0.0; CONTOUR_LEN]; pred.len()];
        let sse = sse_and_grad(&pred, &truth, delta, Some(&mut dpred));
        if !sse.is_finite() {
            return Err(NnError::NonFinite(format!("loss on utterance {} is {sse}", utterance.id)));
        }
        for d in dpred.iter_mut().flatten() {
            *d *= scale;
        }
        for (branch, cache) in self.branches.iter().zip(&caches) {
            self.backward_branch(branch, cache, &dpred, utterance, grads);
        }
        Ok(sse)
    }
}

struct BranchCache {
    xs: Vec<Vec<f64>>,
    body: BodyCache,
    /// Head input followed by the output of each head layer.
    acts: Vec<Vec<Vec<f64>>>,
}

impl BranchCache {
    fn output(&self) -> &[Vec<f64>] {
        self.acts.last().map(Vec::as_slice).unwrap_or_default()
    }
}

enum BodyCache {
    Direct,
    Lstm(Vec<LstmStep>),
    Blstm(Vec<LstmStep>, Vec<LstmStep>),
}

/// Mutable views of two tensors that were added consecutively.
fn pair_mut<'a>(layout: &Layout, grads: &'a mut [f64], a: TensorId, b: TensorId) -> (&'a mut [f64], &'a mut [f64]) {
    let (ra, rb) = (layout.get(a).range(), layout.get(b).range());
    debug_assert_eq!(ra.end, rb.start);
    let (x, y) = grads[ra.start..rb.end].split_at_mut(ra.len());
    (x, y)
}

fn lstm_grads<'a>(layout: &Layout, grads: &'a mut [f64], ids: &LstmIds) -> LstmGrads<'a> {
    let (rx, rh, rb) = (layout.get(ids.wx).range(), layout.get(ids.wh).range(), layout.get(ids.b).range());
    debug_assert!(rx.end == rh.start && rh.end == rb.start);
    let (wx, rest) = grads[rx.start..rb.end].split_at_mut(rx.len());
    let (wh, b) = rest.split_at_mut(rh.len());
    LstmGrads { wx, wh, b }
}

fn scaled_truth(u: &UtteranceRecord) -> Vec<Contour> {
    u.syllables
        .iter()
        .map(|s| std::array::from_fn(|i| s.contour[i] / TARGET_SCALE))
        .collect()
}

/// Delta blocks of a contour sequence.
pub fn delta_blocks(seq: &[Contour], delta: DeltaKind) -> Vec<Vec<f64>> {
    let n = seq.len();
    (0..n)
        .map(|t| match delta {
            DeltaKind::None => Vec::new(),
            DeltaKind::InDelta => seq[t].windows(2).map(|w| w[1] - w[0]).collect(),
            DeltaKind::CrossDelta => {
                let mut d = vec![0.0; 2 * CONTOUR_LEN];
                if t > 0 {
                    for i in 0..CONTOUR_LEN {
                        d[i] = seq[t][i] - seq[t - 1][i];
                    }
                }
                if t + 1 < n {
                    for i in 0..CONTOUR_LEN {
                        d[CONTOUR_LEN + i] = seq[t + 1][i] - seq[t][i];
                    }
                }
                d
            }
        })
        .collect()
}

/// Squared error summed over value and delta components. With `grad`, also
/// adds `d sse / d pred` into it.
fn sse_and_grad(pred: &[Contour], truth: &[Contour], delta: DeltaKind, mut grad: Option<&mut [Contour]>) -> f64 {
    let n = pred.len();
    let mut sse = 0.0;
    for t in 0..n {
        for i in 0..CONTOUR_LEN {
            let e = pred[t][i] - truth[t][i];
            sse += e * e;
            if let Some(g) = grad.as_deref_mut() {
                g[t][i] += 2.0 * e;
            }
        }
    }
    let dp = delta_blocks(pred, delta);
    let dy = delta_blocks(truth, delta);
    for t in 0..n {
        for (k, (a, b)) in dp[t].iter().zip(&dy[t]).enumerate() {
            let e = a - b;
            sse += e * e;
            let Some(g) = grad.as_deref_mut() else { continue };
            let ge = 2.0 * e;
            // adjoint of the delta maps
            match delta {
                DeltaKind::None => {}
                DeltaKind::InDelta => {
                    g[t][k + 1] += ge;
                    g[t][k] -= ge;
                }
                DeltaKind::CrossDelta => {
                    if k < CONTOUR_LEN {
                        if t > 0 {
                            g[t][k] += ge;
                            g[t - 1][k] -= ge;
                        }
                    } else if t + 1 < n {
                        let i = k - CONTOUR_LEN;
                        g[t + 1][i] += ge;
                        g[t][i] -= ge;
                    }
                }
            }
        }
    }
    sse
}

/// Delta-regularized loss: squared errors of the value components and of the
/// delta components (`Δŷ - Δy`), summed, divided by the number of value
/// components (syllables × 10). With [`DeltaKind::None`] this is the plain
/// MSE, and adding a delta block never lowers it.
pub fn loss_with_delta(pred: &[Vec<Contour>], truth: &[Vec<Contour>], delta: DeltaKind) -> Result<f64, NnError> {
    if pred.len() != truth.len() {
        return Err(NnError::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut sse = 0.0;
    let mut count = 0;
    for (p, y) in pred.iter().zip(truth) {
        if p.len() != y.len() {
            return Err(NnError::LengthMismatch {
                expected: y.len(),
                found: p.len(),
            });
        }
        sse += sse_and_grad(p, y, delta, None);
        count += p.len() * CONTOUR_LEN;
    }
    if count == 0 {
        return Err(NnError::EmptySequence);
    }
    Ok(sse / count as f64)
}

/// Loss and its exact gradient with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Gradient of [`NeuralModel::loss`] over `utterances` (mean reduction).
pub fn compute_gradients(model: &NeuralModel, utterances: &[&UtteranceRecord], delta: DeltaKind) -> Result<Gradients, NnError> {
    if utterances.is_empty() {
        return Err(NnError::EmptyCorpus);
    }
    let count: usize = utterances.iter().map(|u| u.syllables.len() * CONTOUR_LEN).sum();
    let scale = 1.0 / count.max(1) as f64;
    let mut grad = vec![0.0; model.params.len()];
    let mut sse = 0.0;
    for u in utterances {
        sse += model.accumulate_gradients(u, delta, scale, &mut grad)?;
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(NnError::NonFinite(format!("gradient component {i} is not finite")));
    }
    Ok(Gradients {
        loss: sse * scale,
        grad,
    })
}

pub fn additive_forward(model: &NeuralModel, utterance: &UtteranceRecord, delta: DeltaKind) -> Result<PredictionBundle, NnError> {
    model.forward(utterance, delta)
}

/// Predicted contours in Hz; the delta block is dropped.
pub fn predict_neural(model: &NeuralModel, utterance: &UtteranceRecord) -> Result<Vec<Contour>, NnError> {
    Ok(model.forward(utterance, DeltaKind::None)?.total)
}

/// Single-path baseline on the union of all feature levels.
pub fn make_baseline(kind: ModelKind, dims: NetDims, train: &Corpus, seed: u64) -> Result<NeuralModel, NnError> {
    if kind == ModelKind::Additive {
        return Err(NnError::InvalidConfig("the additive model is not a baseline".into()));
    }
    NeuralModel::new(kind, dims, train, seed)
}
