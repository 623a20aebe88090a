//! Utterance/syllable data model, corpus files, synthetic data and splits.

mod io;
mod schema;
mod split;
mod synth;

use std::path::PathBuf;

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, CORPUS_HEADER};
pub use schema::{FeatureDef, FeatureKind, FeatureSchema, FeatureValue, Level};
pub use split::split_corpus;
pub use synth::{
    generate_synthetic, neutral_tone, synthetic_schema, tone_templates, word_emphasis_gain,
    SynthConfig, CANTONESE_TEMPLATES, LEXICON_SIZE, MANDARIN_TEMPLATES,
};

use crate::Contour;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("utterance {utterance}{}: field `{field}`: {message}", syllable.map(|s| format!(" syllable {s}")).unwrap_or_default())]
    SchemaViolation {
        utterance: String,
        syllable: Option<usize>,
        field: String,
        message: String,
    },
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("corpus has {0} utterances, at least 3 are needed to split")]
    TooFewUtterances(usize),
}

/// One syllable: linguistic features in schema order, tone and target contour.
#[derive(Debug, Clone, PartialEq)]
pub struct SyllableRecord {
    pub tone: u8,
    pub features: Vec<FeatureValue>,
    pub contour: Contour,
    pub word_index: usize,
    pub phrase_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub surface: u32,
    pub pos: String,
}

/// Half-open syllable span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseSpan {
    pub start: usize,
    pub end: usize,
}

impl PhraseSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub syllables: Vec<SyllableRecord>,
    pub words: Vec<Word>,
    pub phrases: Vec<PhraseSpan>,
}

impl UtteranceRecord {
    pub fn contours(&self) -> Vec<Contour> {
        self.syllables.iter().map(|s| s.contour).collect()
    }

    fn violation(&self, syllable: Option<usize>, field: &str, message: String) -> CorpusError {
        CorpusError::SchemaViolation {
            utterance: self.id.clone(),
            syllable,
            field: field.to_string(),
            message,
        }
    }

    /// Checks structural invariants and schema conformance.
    pub fn validate(&self, schema: &FeatureSchema, tones: &[u8]) -> Result<(), CorpusError> {
        if !crate::textio::is_token(&self.id) {
            return Err(self.violation(None, "id", "utterance id must be a non-empty token".into()));
        }
        if self.syllables.is_empty() {
            return Err(self.violation(None, "syllables", "utterance has no syllables".into()));
        }
        let mut expected_start = 0;
        for (k, p) in self.phrases.iter().enumerate() {
            if p.start != expected_start || p.end <= p.start {
                return Err(self.violation(
                    None,
                    "phrases",
                    format!("phrase {k} span [{}, {}) leaves a gap, overlaps or is empty", p.start, p.end),
                ));
            }
            expected_start = p.end;
        }
        if expected_start != self.syllables.len() {
            return Err(self.violation(
                None,
                "phrases",
                format!("phrases cover {expected_start} of {} syllables", self.syllables.len()),
            ));
        }
        for w in &self.words {
            if !crate::textio::is_token(&w.pos) {
                return Err(self.violation(None, "words", format!("bad part-of-speech tag {:?}", w.pos)));
            }
        }
        for (i, s) in self.syllables.iter().enumerate() {
            if !tones.contains(&s.tone) {
                return Err(self.violation(Some(i), "tone", format!("tone {} not in inventory", s.tone)));
            }
            if s.word_index >= self.words.len() {
                return Err(self.violation(Some(i), "word_index", format!("{} out of range", s.word_index)));
            }
            match self.phrases.get(s.phrase_index) {
                Some(p) if (p.start..p.end).contains(&i) => {}
                _ => {
                    return Err(self.violation(
                        Some(i),
                        "phrase_index",
                        format!("phrase {} does not contain the syllable", s.phrase_index),
                    ))
                }
            }
            if let Some(bad) = s.contour.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(self.violation(Some(i), "contour", format!("non-positive or non-finite f0 {bad}")));
            }
            schema
                .check_values(&s.features)
                .map_err(|(field, message)| self.violation(Some(i), &field, message))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub schema: FeatureSchema,
    pub tone_inventory: Vec<u8>,
    pub utterances: Vec<UtteranceRecord>,
}

impl Corpus {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for u in &self.utterances {
            u.validate(&self.schema, &self.tone_inventory)?;
        }
        Ok(())
    }

    pub fn syllable_count(&self) -> usize {
        self.utterances.iter().map(|u| u.syllables.len()).sum()
    }

    /// Same schema and tone inventory, different utterances.
    pub fn with_utterances(&self, utterances: Vec<UtteranceRecord>) -> Corpus {
        Corpus {
            schema: self.schema.clone(),
            tone_inventory: self.tone_inventory.clone(),
            utterances,
        }
    }
}
