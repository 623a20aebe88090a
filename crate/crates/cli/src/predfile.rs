//! Prediction files: CSV with header `utt_id,syl_index,v0,...,v9`, one row
//! per syllable in corpus order. Values use the shortest representation that
//! reads back exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use f0lab::{Contour, CONTOUR_LEN};

use crate::CliError;

pub fn header() -> String {
    let mut h = String::from("utt_id,syl_index");
    for i in 0..CONTOUR_LEN {
        let _ = write!(h, ",v{i}");
    }
    h
}

pub fn format_predictions(rows: &[(String, Vec<Contour>)]) -> String {
    let mut out = header();
    out.push('\n');
    for (id, contours) in rows {
        for (k, c) in contours.iter().enumerate() {
            let _ = write!(out, "{id},{k}");
            for v in c {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Parsed predictions keyed by utterance id, syllables in index order.
pub type Predictions = HashMap<String, Vec<Contour>>;

pub fn parse_predictions(text: &str, path: &Path) -> Result<Predictions, CliError> {
    let bad = |line: usize, msg: &str| CliError::Malformed(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == header() => {}
        _ => return Err(bad(1, "missing prediction header")),
    }
    let mut out: Predictions = HashMap::new();
    for (i, line) in lines {
        let n = i + 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 2 + CONTOUR_LEN {
            return Err(bad(n, &format!("expected {} fields, found {}", 2 + CONTOUR_LEN, fields.len())));
        }
        let idx: usize = fields[1].parse().map_err(|_| bad(n, "invalid syllable index"))?;
        let mut c = [0.0; CONTOUR_LEN];
        for (slot, f) in c.iter_mut().zip(&fields[2..]) {
            *slot = f.parse::<f64>().map_err(|_| bad(n, &format!("invalid value {f:?}")))?;
            if !slot.is_finite() {
                return Err(bad(n, "non-finite value"));
            }
        }
        let entry = out.entry(fields[0].to_string()).or_default();
        if idx != entry.len() {
            return Err(bad(n, &format!("syllable index {idx} out of sequence for {}", fields[0])));
        }
        entry.push(c);
    }
    Ok(out)
}
