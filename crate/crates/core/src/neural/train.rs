//! Adam training with one utterance per step, gradient clipping and early
//! stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::NeuralModel;
use super::NnError;
use crate::contour::DeltaKind;
use crate::corpus::{Corpus, UtteranceRecord};
use crate::CONTOUR_LEN;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum number of epochs.
    pub epochs: usize,
    /// Global L2 norm the gradient is clipped to.
    pub clip_norm: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub delta: DeltaKind,
    /// Seeds the utterance order.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            clip_norm: 5.0,
            patience: 5,
            delta: DeltaKind::InDelta,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate 0 is accepted so that a run can be checked to leave
    /// parameters untouched.
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.patience < 1 {
            return Err(NnError::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(NnError::InvalidConfig("clip norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Pooled loss of the per-step (pre-update) forward passes.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: NeuralModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Trains `model` in place of a copy and returns the best-validation copy.
/// A non-finite loss aborts with [`NnError::Diverged`] carrying the history.
pub fn train(model: NeuralModel, train: &Corpus, val: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    let train_utts: Vec<&UtteranceRecord> = train.utterances.iter().filter(|u| !u.syllables.is_empty()).collect();
    let val_utts: Vec<&UtteranceRecord> = val.utterances.iter().filter(|u| !u.syllables.is_empty()).collect();
    if train_utts.is_empty() || val_utts.is_empty() {
        return Err(NnError::EmptyCorpus);
    }
    if train.schema != model.schema || val.schema != model.schema {
        return Err(NnError::SchemaMismatch);
    }
    let mut model = model;
    let mut adam = Adam::new(model.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_utts.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut step_sse = vec![0.0; train_utts.len()];
    let train_count: usize = train_utts.iter().map(|u| u.syllables.len() * CONTOUR_LEN).sum();

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, model.params.clone(), 0);
    let mut waited = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let u = train_utts[k];
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (u.syllables.len() * CONTOUR_LEN) as f64;
            let sse = match model.accumulate_gradients(u, config.delta, scale, &mut grad) {
                Ok(s) => s,
                Err(NnError::NonFinite(_)) => return Err(NnError::Diverged { epoch, history }),
                Err(e) => return Err(e),
            };
            step_sse[k] = sse;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(NnError::Diverged { epoch, history });
            }
            clip(&mut grad, config.clip_norm);
            adam.update(&mut model.params, &grad, config.learning_rate);
        }
        let train_loss = step_sse.iter().sum::<f64>() / train_count as f64;
        let val_loss = model.loss(&val_utts, config.delta)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(NnError::Diverged { epoch, history });
        }
        if val_loss < best.0 {
            best = (val_loss, model.params.clone(), epoch);
            waited = 0;
        } else {
            waited += 1;
            if waited >= config.patience {
                break;
            }
        }
    }
    let best_epoch = best.2;
    if best_epoch > 0 {
        model.params = best.1;
    }
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
