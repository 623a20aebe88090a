use std::fmt;
use std::str::FromStr;

use super::CorpusError;
use crate::textio::is_token;

/// Linguistic level a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Phone,
    Syllable,
    Word,
    Phrase,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Phone => "phone",
            Level::Syllable => "syllable",
            Level::Word => "word",
            Level::Phrase => "phrase",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phone" => Ok(Level::Phone),
            "syllable" => Ok(Level::Syllable),
            "word" => Ok(Level::Word),
            "phrase" => Ok(Level::Phrase),
            other => Err(format!("unknown feature level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    /// Closed value set; values are stored as indices into it.
    Categorical(Vec<String>),
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDef {
    pub name: String,
    pub level: Level,
    pub kind: FeatureKind,
}

/// A feature value. Categorical values are indices into the schema's value
/// set for that feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Cat(u32),
    Num(f64),
}

impl FeatureValue {
    pub fn as_num(self) -> Option<f64> {
        match self {
            FeatureValue::Num(x) => Some(x),
            FeatureValue::Cat(_) => None,
        }
    }

    pub fn as_cat(self) -> Option<u32> {
        match self {
            FeatureValue::Cat(c) => Some(c),
            FeatureValue::Num(_) => None,
        }
    }
}

/// Ordered feature inventory. The order is the encoding order used by every
/// downstream model and by the corpus file format.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    entries: Vec<FeatureDef>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<FeatureDef>) -> Result<Self, CorpusError> {
        for (i, e) in entries.iter().enumerate() {
            if !is_token(&e.name) {
                return Err(CorpusError::InvalidSchema(format!("feature {i} has an invalid name {:?}", e.name)));
            }
            if entries[..i].iter().any(|p| p.name == e.name) {
                return Err(CorpusError::InvalidSchema(format!("duplicate feature name {:?}", e.name)));
            }
            match &e.kind {
                FeatureKind::Categorical(values) => {
                    if values.is_empty() {
                        return Err(CorpusError::InvalidSchema(format!("feature {:?} has an empty value set", e.name)));
                    }
                    if let Some(v) = values.iter().find(|v| !is_token(v)) {
                        return Err(CorpusError::InvalidSchema(format!("feature {:?} has invalid value {v:?}", e.name)));
                    }
                    for (j, v) in values.iter().enumerate() {
                        if values[..j].contains(v) {
                            return Err(CorpusError::InvalidSchema(format!(
                                "feature {:?} repeats value {v:?}",
                                e.name
                            )));
                        }
                    }
                }
                FeatureKind::Numeric { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min <= max) {
                        return Err(CorpusError::InvalidSchema(format!("feature {:?} has a bad range", e.name)));
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[FeatureDef] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> &FeatureDef {
        &self.entries[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Indices of features at any of the given levels, in schema order.
    pub fn indices_at(&self, levels: &[Level]) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| levels.contains(&e.level))
            .map(|(i, _)| i)
            .collect()
    }

    /// Index of `value` in the value set of categorical feature `feature`.
    pub fn category_index(&self, feature: usize, value: &str) -> Option<u32> {
        match &self.entries[feature].kind {
            FeatureKind::Categorical(values) => values.iter().position(|v| v == value).map(|p| p as u32),
            FeatureKind::Numeric { .. } => None,
        }
    }

    pub fn category_name(&self, feature: usize, index: u32) -> Option<&str> {
        match &self.entries[feature].kind {
            FeatureKind::Categorical(values) => values.get(index as usize).map(String::as_str),
            FeatureKind::Numeric { .. } => None,
        }
    }

    /// Checks a full feature row. The error carries the offending field name.
    pub fn check_values(&self, values: &[FeatureValue]) -> Result<(), (String, String)> {
        if values.len() != self.entries.len() {
            return Err((
                "features".into(),
                format!("expected {} feature values, found {}", self.entries.len(), values.len()),
            ));
        }
        for (def, v) in self.entries.iter().zip(values) {
            match (&def.kind, v) {
                (FeatureKind::Categorical(set), FeatureValue::Cat(c)) => {
                    if *c as usize >= set.len() {
                        return Err((def.name.clone(), format!("category index {c} out of range")));
                    }
                }
                (FeatureKind::Numeric { min, max }, FeatureValue::Num(x)) => {
                    if !(x.is_finite() && *x >= *min && *x <= *max) {
                        return Err((def.name.clone(), format!("value {x} outside [{min}, {max}]")));
                    }
                }
                _ => return Err((def.name.clone(), "value kind does not match schema".into())),
            }
        }
        Ok(())
    }

    /// Renders one value as it appears in the corpus file.
    pub fn format_value(&self, feature: usize, value: FeatureValue) -> String {
        match value {
            FeatureValue::Cat(c) => self
                .category_name(feature, c)
                .map(str::to_string)
                .unwrap_or_else(|| format!("?{c}")),
            FeatureValue::Num(x) => crate::textio::fmt_sig9(x),
        }
    }

    pub fn parse_value(&self, feature: usize, token: &str) -> Result<FeatureValue, String> {
        let def = &self.entries[feature];
        match &def.kind {
            FeatureKind::Categorical(_) => self
                .category_index(feature, token)
                .map(FeatureValue::Cat)
                .ok_or_else(|| format!("value {token:?} not in the value set of `{}`", def.name)),
            FeatureKind::Numeric { .. } => token
                .parse::<f64>()
                .map(FeatureValue::Num)
                .map_err(|_| format!("`{}` expects a number, found {token:?}", def.name)),
        }
    }

    /// `feature <name> <level> categorical <values...>` or
    /// `feature <name> <level> numeric <min> <max>`.
    pub fn to_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| match &e.kind {
                FeatureKind::Categorical(values) => {
                    format!("feature {} {} categorical {}", e.name, e.level, values.join(" "))
                }
                FeatureKind::Numeric { min, max } => format!(
                    "feature {} {} numeric {} {}",
                    e.name,
                    e.level,
                    crate::textio::fmt_exact(*min),
                    crate::textio::fmt_exact(*max)
                ),
            })
            .collect()
    }

    pub fn parse_line(line: &str) -> Result<FeatureDef, String> {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("feature") {
            return Err("expected a `feature` line".into());
        }
        let name = tok.next().ok_or("missing feature name")?.to_string();
        let level: Level = tok.next().ok_or("missing feature level")?.parse()?;
        let kind = match tok.next() {
            Some("categorical") => FeatureKind::Categorical(tok.by_ref().map(str::to_string).collect()),
            Some("numeric") => {
                let mut num = || -> Result<f64, String> {
                    tok.next()
                        .ok_or("missing numeric bound")?
                        .parse::<f64>()
                        .map_err(|e| e.to_string())
                };
                let min = num()?;
                let max = num()?;
                FeatureKind::Numeric { min, max }
            }
            other => return Err(format!("unknown feature kind {other:?}")),
        };
        if tok.next().is_some() {
            return Err("trailing tokens after feature definition".into());
        }
        Ok(FeatureDef { name, level, kind })
    }
}
