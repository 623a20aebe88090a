//! Objective metrics: RMSE and Pearson correlation at syllable and utterance
//! level.
//!
//! Syllable level scores each 10-point syllable vector and averages over all
//! syllables. Utterance level concatenates each utterance's syllable vectors,
//! scores the concatenation and averages over utterances. Averages are
//! unweighted. Units whose predicted or true contour is constant have no
//! defined correlation; they are left out of the correlation average and
//! counted in the report.

use std::fmt::Write as _;

use crate::corpus::Corpus;
use crate::Contour;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("{found} predicted utterances for {expected} reference utterances")]
    UtteranceCount { expected: usize, found: usize },
    #[error("utterance {utterance}: {found} predicted syllables, reference has {expected}")]
    SyllableCount {
        utterance: String,
        expected: usize,
        found: usize,
    },
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::TooShort { needed: 1, found: 0 });
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(mse.sqrt())
}

/// Pearson correlation. `defined` is false when either input is constant, in
/// which case `r` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub r: f64,
    pub defined: bool,
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<Pearson, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::TooShort {
            needed: 2,
            found: a.len(),
        });
    }
    if is_constant(a) || is_constant(b) {
        return Ok(Pearson { r: 0.0, defined: false });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let r = (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    Ok(Pearson { r, defined: true })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceScore {
    pub id: String,
    pub syllables: usize,
    pub rmse: f64,
    /// `None` when the concatenated contour is constant.
    pub corr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub syl_rmse: f64,
    pub syl_corr: f64,
    pub utt_rmse: f64,
    pub utt_corr: f64,
    pub n_syllables: usize,
    pub n_utterances: usize,
    pub syl_corr_excluded: usize,
    pub utt_corr_excluded: usize,
    pub per_utterance: Vec<UtteranceScore>,
}

fn mean_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Scores `pred` (one list of contours per utterance, in corpus order)
/// against `truth`.
pub fn evaluate(pred: &[Vec<Contour>], truth: &Corpus) -> Result<EvalReport, EvalError> {
    if pred.len() != truth.utterances.len() {
        return Err(EvalError::UtteranceCount {
            expected: truth.utterances.len(),
            found: pred.len(),
        });
    }
    let mut syl_rmse = Vec::new();
    let mut syl_corr = Vec::new();
    let mut syl_excluded = 0;
    let mut utt_rmse = Vec::new();
    let mut utt_corr = Vec::new();
    let mut per_utterance = Vec::with_capacity(pred.len());

    for (p, u) in pred.iter().zip(&truth.utterances) {
        if p.len() != u.syllables.len() {
            return Err(EvalError::SyllableCount {
                utterance: u.id.clone(),
                expected: u.syllables.len(),
                found: p.len(),
            });
        }
        for (ps, ts) in p.iter().zip(&u.syllables) {
            syl_rmse.push(rmse(ps, &ts.contour)?);
            let c = pearson(ps, &ts.contour)?;
            if c.defined {
                syl_corr.push(c.r);
            } else {
                syl_excluded += 1;
            }
        }
        if p.is_empty() {
            continue;
        }
        let flat_pred: Vec<f64> = p.iter().flatten().copied().collect();
        let flat_true: Vec<f64> = u.syllables.iter().flat_map(|s| s.contour).collect();
        let r = rmse(&flat_pred, &flat_true)?;
        let c = pearson(&flat_pred, &flat_true)?;
        utt_rmse.push(r);
        if c.defined {
            utt_corr.push(c.r);
        }
        per_utterance.push(UtteranceScore {
            id: u.id.clone(),
            syllables: p.len(),
            rmse: r,
            corr: c.defined.then_some(c.r),
        });
    }

    Ok(EvalReport {
        syl_rmse: mean_or_zero(&syl_rmse),
        syl_corr: mean_or_zero(&syl_corr),
        utt_rmse: mean_or_zero(&utt_rmse),
        utt_corr: mean_or_zero(&utt_corr),
        n_syllables: syl_rmse.len(),
        n_utterances: utt_rmse.len(),
        syl_corr_excluded: syl_excluded,
        utt_corr_excluded: utt_rmse.len() - utt_corr.len(),
        per_utterance,
    })
}

impl EvalReport {
    /// Flat `key = value` document (valid TOML).
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "syl_rmse = {}", self.syl_rmse);
        let _ = writeln!(s, "syl_corr = {}", self.syl_corr);
        let _ = writeln!(s, "utt_rmse = {}", self.utt_rmse);
        let _ = writeln!(s, "utt_corr = {}", self.utt_corr);
        let _ = writeln!(s, "n_syllables = {}", self.n_syllables);
        let _ = writeln!(s, "n_utterances = {}", self.n_utterances);
        let _ = writeln!(s, "syl_corr_excluded = {}", self.syl_corr_excluded);
        let _ = writeln!(s, "utt_corr_excluded = {}", self.utt_corr_excluded);
        for u in &self.per_utterance {
            let _ = writeln!(s, "\"utt.{}.rmse\" = {}", u.id, u.rmse);
            match u.corr {
                Some(c) => {
                    let _ = writeln!(s, "\"utt.{}.corr\" = {}", u.id, c);
                }
                None => {
                    let _ = writeln!(s, "\"utt.{}.corr\" = nan", u.id);
                }
            }
        }
        s
    }
}
