//! Neural f0 models trained from scratch: per-syllable MLP, LSTM and BLSTM
//! baselines and the two-branch Additive-BLSTM.
//!
//! The Additive model encodes phone, syllable and phrase features for a
//! base branch (BLSTM + ReLU MLP) and word and syllable features for a
//! residual branch (BLSTM + tanh MLP); the predicted contour is the sum of the
//! two branch outputs. Baselines use one encoder over every feature.
//!
//! Contours enter the loss divided by [`TARGET_SCALE`]. The loss adds the
//! squared errors of an optional delta block ([`DeltaKind`]) to those of the
//! values and divides by the number of value components. Gradients are exact
//! (backpropagation through time).
//!
//! [`DeltaKind`]: crate::contour::DeltaKind

mod encoder;
mod io;
mod layers;
mod layout;
mod model;
mod train;

use std::path::PathBuf;

pub use encoder::{FeatureEncoder, Slot, SlotStats, ALL_LEVELS, SET1_LEVELS, SET2_LEVELS};
pub use io::{load_neural, read_neural, save_neural, write_neural, NN_HEADER};
pub use layers::{blstm_forward, lstm_step, Activation, Dense, LstmCell, LstmStep};
pub use layout::{Layout, TensorId, TensorSpec};
pub use model::{
    additive_forward, compute_gradients, delta_blocks, loss_with_delta, make_baseline, predict_neural, EncoderStats,
    Gradients, ModelKind, NetDims, NeuralModel, PredictionBundle, TARGET_SCALE,
};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus has no syllables")]
    EmptyCorpus,
    #[error("empty syllable sequence")]
    EmptySequence,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("utterance {utterance}: expected {expected} features per syllable, found {found}")]
    FeatureCount {
        utterance: String,
        expected: usize,
        found: usize,
    },
    #[error("corpus schema does not match the model schema")]
    SchemaMismatch,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, history: Vec<EpochRecord> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
