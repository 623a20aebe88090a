//! # f0lab
//!
//! Modelling of per-syllable fundamental frequency (f0) contours for tone
//! languages.
//!
//! The crate is organised around the data flow of an experiment:
//!
//! - [`corpus`]: utterance/syllable data model, the `F0LAB-CORPUS v1` text
//!   format, a synthetic tone-language generator and deterministic splits.
//! - [`contour`]: syllable subsampling and the f0 representations (raw
//!   10-point vectors, truncated orthonormal DCT, per-sample z-score shape with
//!   mean/std) together with the in-syllable and cross-syllable delta blocks.
//! - [`cart`]: vector-output regression trees, the four tree architectures
//!   (single, tone-dependent, phrase+syllable additive, per-scalar) and the
//!   randomized forest.
//! - [`neural`]: MLP / LSTM / BLSTM baselines and the two-branch
//!   Additive-BLSTM trained from scratch with exact backpropagation through
//!   time.
//! - [`eval`]: syllable- and utterance-level RMSE and Pearson correlation.
//!
//! Every syllable contour is a [`Contour`], ten f0 values in Hz.

pub mod cart;
pub mod contour;
pub mod corpus;
pub mod eval;
pub mod neural;
pub mod textio;

/// Number of f0 samples kept per syllable.
pub const CONTOUR_LEN: usize = 10;

/// A syllable's subsampled f0 contour in Hz.
pub type Contour = [f64; CONTOUR_LEN];

pub use contour::{BaseRepr, DeltaKind, RepresentationSpec};
pub use corpus::{Corpus, FeatureSchema, SynthConfig};
pub use eval::EvalReport;
