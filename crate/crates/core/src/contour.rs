//! Syllable contour subsampling and f0 representations.
//!
//! A representation is a base codec ([`BaseRepr`]) plus an optional delta
//! block ([`DeltaKind`]). Delta blocks exist only to regularize training
//! targets; decoding always drops them.

use std::fmt;
use std::sync::OnceLock;

use crate::corpus::UtteranceRecord;
use crate::{Contour, CONTOUR_LEN};

/// Lower bound applied to the standard deviation before shape normalization.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ContourError {
    #[error("no voiced frames in syllable")]
    NoVoicedFrames,
    #[error("coefficient count {k} outside 1..={n}")]
    CoefficientCount { k: usize, n: usize },
    #[error("delta needs a vector of dimension >= 2, found {0}")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("syllable index {index} out of range for utterance with {len} syllables")]
    SyllableIndex { index: usize, len: usize },
    #[error("missing (mean, std) for a shape vector")]
    MissingStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseRepr {
    OriF0,
    /// First `K` orthonormal DCT-II coefficients.
    Dct(usize),
    ShapeMs,
}

impl BaseRepr {
    /// Dimension of the base vector `v`.
    pub fn dim(self) -> usize {
        match self {
            BaseRepr::OriF0 | BaseRepr::ShapeMs => CONTOUR_LEN,
            BaseRepr::Dct(k) => k,
        }
    }

    pub fn is_lossless(self) -> bool {
        !matches!(self, BaseRepr::Dct(k) if k < CONTOUR_LEN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DeltaKind {
    #[default]
    None,
    /// Differences between consecutive components of one vector.
    InDelta,
    /// Differences to the previous and next syllable's vector.
    CrossDelta,
}

impl DeltaKind {
    /// Size of the delta block for a base vector of dimension `d`.
    pub fn dim(self, d: usize) -> usize {
        match self {
            DeltaKind::None => 0,
            DeltaKind::InDelta => d.saturating_sub(1),
            DeltaKind::CrossDelta => 2 * d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RepresentationSpec {
    pub base: BaseRepr,
    pub delta: DeltaKind,
}

impl RepresentationSpec {
    pub fn new(base: BaseRepr, delta: DeltaKind) -> Result<Self, ContourError> {
        let spec = Self { base, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ContourError> {
        if let BaseRepr::Dct(k) = self.base {
            if !(1..=CONTOUR_LEN).contains(&k) {
                return Err(ContourError::CoefficientCount { k, n: CONTOUR_LEN });
            }
        }
        if self.delta == DeltaKind::InDelta && self.base.dim() < 2 {
            return Err(ContourError::DimensionTooSmall(self.base.dim()));
        }
        Ok(())
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn delta_dim(&self) -> usize {
        self.delta.dim(self.base.dim())
    }
}

impl fmt::Display for RepresentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.base {
            BaseRepr::OriF0 => write!(f, "orif0")?,
            BaseRepr::Dct(k) => write!(f, "dct{k}")?,
            BaseRepr::ShapeMs => write!(f, "shapems")?,
        }
        match self.delta {
            DeltaKind::None => Ok(()),
            DeltaKind::InDelta => write!(f, "+in-delta"),
            DeltaKind::CrossDelta => write!(f, "+cross-delta"),
        }
    }
}

impl std::str::FromStr for RepresentationSpec {
    type Err = String;

    /// Parses the [`Display`](fmt::Display) form, e.g. `dct5+cross-delta`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (base, delta) = match s.split_once('+') {
            Some((b, d)) => (b, Some(d)),
            None => (s.as_str(), None),
        };
        let base = match base {
            "orif0" => BaseRepr::OriF0,
            "shapems" => BaseRepr::ShapeMs,
            b => match b.strip_prefix("dct").map(str::parse::<usize>) {
                Some(Ok(k)) => BaseRepr::Dct(k),
                _ => return Err(format!("unknown representation {b:?}")),
            },
        };
        let delta = match delta {
            None | Some("none") => DeltaKind::None,
            Some("in-delta") => DeltaKind::InDelta,
            Some("cross-delta") => DeltaKind::CrossDelta,
            Some(d) => return Err(format!("unknown delta kind {d:?}")),
        };
        RepresentationSpec::new(base, delta).map_err(|e| e.to_string())
    }
}

/// Output of [`encode_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    /// Base representation vector.
    pub v: Vec<f64>,
    pub delta: Option<Vec<f64>>,
    /// `(mean, std)` for ShapeMS.
    pub aux: Option<(f64, f64)>,
}

impl EncodedSample {
    /// `v` followed by the delta block, the vector a tree is trained on.
    pub fn target(&self) -> Vec<f64> {
        let mut t = self.v.clone();
        if let Some(d) = &self.delta {
            t.extend_from_slice(d);
        }
        t
    }
}

/// Resamples a frame-level f0 track to [`CONTOUR_LEN`] points.
///
/// Unvoiced frames are filled by linear interpolation between the nearest
/// voiced frames, with flat extension at both ends. The filled track is then
/// sampled at equally spaced positions of normalized time [0, 1].
pub fn subsample_contour(frames: &[(f64, bool)]) -> Result<Contour, ContourError> {
    let voiced: Vec<usize> = frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.1)
        .map(|(i, _)| i)
        .collect();
    let (&first, &last) = match (voiced.first(), voiced.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ContourError::NoVoicedFrames),
    };

    let mut filled: Vec<f64> = frames.iter().map(|f| f.0).collect();
    for v in filled.iter_mut().take(first) {
        *v = frames[first].0;
    }
    for v in filled.iter_mut().skip(last + 1) {
        *v = frames[last].0;
    }
    for pair in voiced.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (fa, fb) = (frames[a].0, frames[b].0);
        for (i, v) in filled.iter_mut().enumerate().take(b).skip(a + 1) {
            let t = (i - a) as f64 / (b - a) as f64;
            *v = fa + t * (fb - fa);
        }
    }

    let n = filled.len();
    let mut out = [0.0; CONTOUR_LEN];
    for (k, o) in out.iter_mut().enumerate() {
        let pos = k as f64 * (n - 1) as f64 / (CONTOUR_LEN - 1) as f64;
        let lo = (pos.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        *o = if frac == 0.0 {
            filled[lo]
        } else {
            filled[lo] + frac * (filled[hi] - filled[lo])
        };
    }
    Ok(out)
}

/// Orthonormal DCT-II basis for length `n`: row `k` is basis vector `k`.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            b[k * n + i] = scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos();
        }
    }
    b
}

fn contour_basis() -> &'static [f64] {
    static BASIS: OnceLock<Vec<f64>> = OnceLock::new();
    BASIS.get_or_init(|| dct_basis(CONTOUR_LEN))
}

/// First `k` orthonormal DCT-II coefficients of an arbitrary-length signal.
pub fn dct_encode_n(signal: &[f64], k: usize) -> Result<Vec<f64>, ContourError> {
    let n = signal.len();
    if k < 1 || k > n {
        return Err(ContourError::CoefficientCount { k, n });
    }
    let owned;
    let basis: &[f64] = if n == CONTOUR_LEN {
        contour_basis()
    } else {
        owned = dct_basis(n);
        &owned
    };
    Ok((0..k)
        .map(|row| basis[row * n..(row + 1) * n].iter().zip(signal).map(|(b, x)| b * x).sum())
        .collect())
}

/// Inverse orthonormal DCT-II of length `n`; missing coefficients are zero.
pub fn dct_decode_n(coeffs: &[f64], n: usize) -> Result<Vec<f64>, ContourError> {
    let k = coeffs.len();
    if k < 1 || k > n {
        return Err(ContourError::CoefficientCount { k, n });
    }
    let owned;
    let basis: &[f64] = if n == CONTOUR_LEN {
        contour_basis()
    } else {
        owned = dct_basis(n);
        &owned
    };
    let mut out = vec![0.0; n];
    for (row, &c) in coeffs.iter().enumerate() {
        for (o, b) in out.iter_mut().zip(&basis[row * n..(row + 1) * n]) {
            *o += c * b;
        }
    }
    Ok(out)
}

pub fn dct_encode(v: &Contour, k: usize) -> Result<Vec<f64>, ContourError> {
    dct_encode_n(v, k)
}

pub fn dct_decode(coeffs: &[f64]) -> Result<Contour, ContourError> {
    let v = dct_decode_n(coeffs, CONTOUR_LEN)?;
    let mut out = [0.0; CONTOUR_LEN];
    out.copy_from_slice(&v);
    Ok(out)
}

/// Per-sample z-score: `(shape, mean, population std)`.
pub fn shapems_encode(v: &Contour) -> (Contour, f64, f64) {
    let n = CONTOUR_LEN as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let denom = std.max(STD_FLOOR);
    let mut shape = [0.0; CONTOUR_LEN];
    for (s, x) in shape.iter_mut().zip(v) {
        *s = (x - mean) / denom;
    }
    (shape, mean, std)
}

pub fn shapems_decode(shape: &[f64], mean: f64, std: f64) -> Contour {
    let mut out = [0.0; CONTOUR_LEN];
    for (o, s) in out.iter_mut().zip(shape) {
        *o = s * std + mean;
    }
    out
}

/// `out[j] = v[j + 1] - v[j]`.
pub fn in_delta(v: &[f64]) -> Result<Vec<f64>, ContourError> {
    if v.len() < 2 {
        return Err(ContourError::DimensionTooSmall(v.len()));
    }
    Ok(v.windows(2).map(|w| w[1] - w[0]).collect())
}

/// `[cur - prev, next - cur]`; a missing neighbour contributes a zero block.
pub fn cross_delta(prev: Option<&[f64]>, cur: &[f64], next: Option<&[f64]>) -> Result<Vec<f64>, ContourError> {
    let d = cur.len();
    for other in [prev, next].into_iter().flatten() {
        if other.len() != d {
            return Err(ContourError::DimensionMismatch {
                expected: d,
                found: other.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(2 * d);
    match prev {
        Some(p) => out.extend(cur.iter().zip(p).map(|(c, p)| c - p)),
        None => out.extend(std::iter::repeat_n(0.0, d)),
    }
    match next {
        Some(n) => out.extend(n.iter().zip(cur).map(|(n, c)| n - c)),
        None => out.extend(std::iter::repeat_n(0.0, d)),
    }
    Ok(out)
}

/// Base vector and ShapeMS statistics for a contour.
pub fn encode_base(base: BaseRepr, contour: &Contour) -> Result<(Vec<f64>, Option<(f64, f64)>), ContourError> {
    match base {
        BaseRepr::OriF0 => Ok((contour.to_vec(), None)),
        BaseRepr::Dct(k) => Ok((dct_encode(contour, k)?, None)),
        BaseRepr::ShapeMs => {
            let (shape, mean, std) = shapems_encode(contour);
            Ok((shape.to_vec(), Some((mean, std))))
        }
    }
}

/// Inverse of [`encode_base`].
pub fn decode_base(base: BaseRepr, v: &[f64], aux: Option<(f64, f64)>) -> Result<Contour, ContourError> {
    let expected = base.dim();
    if v.len() != expected {
        return Err(ContourError::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    match base {
        BaseRepr::OriF0 => {
            let mut out = [0.0; CONTOUR_LEN];
            out.copy_from_slice(v);
            Ok(out)
        }
        BaseRepr::Dct(_) => dct_decode(v),
        BaseRepr::ShapeMs => {
            let (mean, std) = aux.ok_or(ContourError::MissingStats)?;
            Ok(shapems_decode(v, mean, std))
        }
    }
}

/// Encodes the contours of a whole syllable sequence; cross deltas use the
/// sequence neighbours.
pub fn encode_sequence(spec: &RepresentationSpec, contours: &[Contour]) -> Result<Vec<EncodedSample>, ContourError> {
    spec.validate()?;
    let bases = contours
        .iter()
        .map(|c| encode_base(spec.base, c))
        .collect::<Result<Vec<_>, _>>()?;
    (0..bases.len())
        .map(|t| {
            let v = &bases[t].0;
            let delta = match spec.delta {
                DeltaKind::None => None,
                DeltaKind::InDelta => Some(in_delta(v)?),
                DeltaKind::CrossDelta => {
                    let prev = t.checked_sub(1).map(|p| bases[p].0.as_slice());
                    let next = bases.get(t + 1).map(|n| n.0.as_slice());
                    Some(cross_delta(prev, v, next)?)
                }
            };
            Ok(EncodedSample {
                v: v.clone(),
                delta,
                aux: bases[t].1,
            })
        })
        .collect()
}

pub fn encode_sample(
    spec: &RepresentationSpec,
    utterance: &UtteranceRecord,
    syllable_index: usize,
) -> Result<EncodedSample, ContourError> {
    let len = utterance.syllables.len();
    if syllable_index >= len {
        return Err(ContourError::SyllableIndex {
            index: syllable_index,
            len,
        });
    }
    let lo = syllable_index.saturating_sub(1);
    let hi = (syllable_index + 2).min(len);
    let window: Vec<Contour> = utterance.syllables[lo..hi].iter().map(|s| s.contour).collect();
    let mut encoded = encode_sequence(spec, &window)?;
    Ok(encoded.swap_remove(syllable_index - lo))
}

/// Drops the delta block and inverts the base representation.
pub fn decode_sample(spec: &RepresentationSpec, sample: &EncodedSample) -> Result<Contour, ContourError> {
    decode_base(spec.base, &sample.v, sample.aux)
}
