//! Regression trees, tree architectures and the randomized forest.

mod forest;
mod io;
mod model;
mod tree;

pub use forest::{predict_forest, train_forest, Forest, ForestConfig, ForestMember};
pub use io::{load_dt_file, read_dt_file, save_dt_file, write_dt_file, DtFile, DT_HEADER};
pub use model::{
    phrase_coefficients, phrase_curve, predict_dt_model, train_dt_model, ArchKind, ArchitectureSpec, DTModel,
    ModelTrees, TreeSet, PHRASE_DCT_COEFFS,
};
pub use tree::{
    best_split, predict_tree, train_tree, Node, Question, QuestionTest, RegressionTree, Sample, TreeConfig,
};

use std::path::PathBuf;

use crate::contour::ContourError;

#[derive(Debug, thiserror::Error)]
pub enum CartError {
    #[error("invalid tree config: {0}")]
    InvalidConfig(String),
    #[error("no training samples")]
    EmptySamples,
    #[error("training targets have inconsistent dimensions")]
    InconsistentTargets,
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("training corpus has no syllables")]
    EmptyCorpus,
    #[error("utterance {utterance}: expected {expected} features per syllable, found {found}")]
    FeatureCount {
        utterance: String,
        expected: usize,
        found: usize,
    },
    #[error("model schema does not match the corpus schema")]
    SchemaMismatch,
    #[error(transparent)]
    Contour(#[from] ContourError),
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
