//! `F0LAB-DT v1` text format for single tree models and forests.
//!
//! ```text
//! F0LAB-DT v1
//! type model|forest
//! arch <architecture> <representation>
//! features <F>
//! feature ...                         (F schema lines, as in corpus files)
//! trees ...                           (model only)
//! members <N>                         (forest only, then N member blocks)
//! member <i>
//! mask <feature>...
//! outputs <K>
//! output <dim> <index>...             (K lines)
//! trees ...
//! ```
//!
//! A `trees` block is `trees single` + set, `trees pertone <T>` + T times
//! (`tone <t>` + set) + `fallback` + set, or `trees phrase` + tree + set. A
//! set is `set vector` + tree, `set shape` + 2 trees or `set scalar <n>` +
//! n trees. A tree is `tree <dim> <nodes>` followed by nodes in preorder:
//!
//! ```text
//! leaf <count> <impurity> <mean>...
//! split <feature> eq <category> <yes> <no> <count> <impurity>
//! split <feature> le <threshold> <yes> <no> <count> <impurity>
//! ```
//!
//! Floats use the shortest representation that reads back exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::forest::{Forest, ForestMember};
use super::model::{ArchKind, ArchitectureSpec, DTModel, ModelTrees, TreeSet};
use super::tree::{Node, Question, QuestionTest, RegressionTree};
use super::CartError;
use crate::contour::RepresentationSpec;
use crate::corpus::FeatureSchema;
use crate::textio::{fmt_exact, Lines};

pub const DT_HEADER: &str = "F0LAB-DT v1";

/// Contents of a tree model file.
#[derive(Debug, Clone, PartialEq)]
pub enum DtFile {
    Model(DTModel),
    Forest(Forest),
}

impl DtFile {
    pub fn spec(&self) -> &ArchitectureSpec {
        match self {
            DtFile::Model(m) => &m.spec,
            DtFile::Forest(f) => &f.spec,
        }
    }

    pub fn schema(&self) -> Option<&FeatureSchema> {
        match self {
            DtFile::Model(m) => Some(&m.schema),
            DtFile::Forest(f) => f.members.first().map(|m| &m.model.schema),
        }
    }
}

fn write_tree<W: Write>(out: &mut W, tree: &RegressionTree) -> std::io::Result<()> {
    writeln!(out, "tree {} {}", tree.target_dim(), tree.nodes().len())?;
    for n in tree.nodes() {
        match n {
            Node::Leaf { mean, count, impurity } => {
                let m: Vec<String> = mean.iter().map(|&x| fmt_exact(x)).collect();
                writeln!(out, "leaf {count} {} {}", fmt_exact(*impurity), m.join(" "))?;
            }
            Node::Split {
                question,
                yes,
                no,
                count,
                impurity,
            } => {
                let test = match question.test {
                    QuestionTest::Equals(c) => format!("eq {c}"),
                    QuestionTest::AtMost(t) => format!("le {}", fmt_exact(t)),
                };
                writeln!(
                    out,
                    "split {} {test} {yes} {no} {count} {}",
                    question.feature,
                    fmt_exact(*impurity)
                )?;
            }
        }
    }
    Ok(())
}

fn write_set<W: Write>(out: &mut W, set: &TreeSet) -> std::io::Result<()> {
    match set {
        TreeSet::Vector(t) => {
            writeln!(out, "set vector")?;
            write_tree(out, t)
        }
        TreeSet::Shape { shape, meanstd } => {
            writeln!(out, "set shape")?;
            write_tree(out, shape)?;
            write_tree(out, meanstd)
        }
        TreeSet::Scalar(trees) => {
            writeln!(out, "set scalar {}", trees.len())?;
            trees.iter().try_for_each(|t| write_tree(out, t))
        }
    }
}

fn write_trees<W: Write>(out: &mut W, trees: &ModelTrees) -> std::io::Result<()> {
    match trees {
        ModelTrees::Single(set) => {
            writeln!(out, "trees single")?;
            write_set(out, set)
        }
        ModelTrees::PerTone { by_tone, fallback } => {
            writeln!(out, "trees pertone {}", by_tone.len())?;
            for (tone, set) in by_tone {
                writeln!(out, "tone {tone}")?;
                write_set(out, set)?;
            }
            writeln!(out, "fallback")?;
            write_set(out, fallback)
        }
        ModelTrees::PhraseSyllable { phrase, syllable } => {
            writeln!(out, "trees phrase")?;
            write_tree(out, phrase)?;
            write_set(out, syllable)
        }
    }
}

fn write_preamble<W: Write>(out: &mut W, kind: &str, spec: &ArchitectureSpec, schema: &FeatureSchema) -> std::io::Result<()> {
    writeln!(out, "{DT_HEADER}")?;
    writeln!(out, "type {kind}")?;
    writeln!(out, "arch {} {}", spec.kind, spec.representation)?;
    writeln!(out, "features {}", schema.len())?;
    for line in schema.to_lines() {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_dt_file<W: Write>(file: &DtFile, mut out: W) -> std::io::Result<()> {
    match file {
        DtFile::Model(m) => {
            write_preamble(&mut out, "model", &m.spec, &m.schema)?;
            write_trees(&mut out, &m.trees)?;
        }
        DtFile::Forest(f) => {
            let empty = FeatureSchema::empty();
            let schema = file.schema().unwrap_or(&empty);
            write_preamble(&mut out, "forest", &f.spec, schema)?;
            writeln!(out, "members {}", f.members.len())?;
            for (i, m) in f.members.iter().enumerate() {
                writeln!(out, "member {i}")?;
                let mask: Vec<String> = m.feature_mask.iter().map(usize::to_string).collect();
                writeln!(out, "mask {}", mask.join(" "))?;
                writeln!(out, "outputs {}", m.output_masks.len())?;
                for (dim, idx) in &m.output_masks {
                    let idx: Vec<String> = idx.iter().map(usize::to_string).collect();
                    writeln!(out, "output {dim} {}", idx.join(" "))?;
                }
                write_trees(&mut out, &m.model.trees)?;
            }
        }
    }
    out.flush()
}

pub fn save_dt_file(file: &DtFile, path: &Path) -> Result<(), CartError> {
    let io_err = |source| CartError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = File::create(path).map_err(io_err)?;
    write_dt_file(file, BufWriter::new(f)).map_err(io_err)
}

pub fn load_dt_file(path: &Path) -> Result<DtFile, CartError> {
    let f = File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CartError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            CartError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    read_dt_file(BufReader::new(f))
}

struct Parser<R> {
    lines: Lines<R>,
}

impl<R: BufRead> Parser<R> {
    fn err(&self, message: impl Into<String>) -> CartError {
        CartError::Parse {
            line: self.lines.line_no(),
            message: message.into(),
        }
    }

    fn line(&mut self) -> Result<String, CartError> {
        match self.lines.next_line() {
            Ok(Some(l)) => Ok(l.to_string()),
            Ok(None) => Err(self.err("unexpected end of file")),
            Err(e) => Err(self.err(e.to_string())),
        }
    }

    /// Reads a line starting with `keyword` and returns the remaining tokens.
    fn expect(&mut self, keyword: &str) -> Result<Vec<String>, CartError> {
        let line = self.line()?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, found {line:?}")));
        }
        Ok(tok.map(str::to_string).collect())
    }

    fn num<T: FromStr>(&self, tok: Option<&String>, what: &str) -> Result<T, CartError> {
        tok.ok_or_else(|| self.err(format!("missing {what}")))?
            .parse()
            .map_err(|_| self.err(format!("invalid {what}")))
    }

    fn tree(&mut self, n_features: usize) -> Result<RegressionTree, CartError> {
        let head = self.expect("tree")?;
        let dim: usize = self.num(head.first(), "tree dimension")?;
        let n: usize = self.num(head.get(1), "node count")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.line()?;
            let tok: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            let node = match tok.first().map(String::as_str) {
                Some("leaf") => {
                    let count = self.num(tok.get(1), "leaf count")?;
                    let impurity = self.num(tok.get(2), "impurity")?;
                    let mean = tok[3.min(tok.len())..]
                        .iter()
                        .map(|t| self.num(Some(t), "leaf mean"))
                        .collect::<Result<Vec<f64>, _>>()?;
                    if mean.len() != dim {
                        return Err(self.err(format!("leaf mean has {} values, expected {dim}", mean.len())));
                    }
                    Node::Leaf { mean, count, impurity }
                }
                Some("split") => {
                    if tok.len() != 8 {
                        return Err(self.err("split line needs 7 fields"));
                    }
                    let feature: usize = self.num(tok.get(1), "feature index")?;
                    if feature >= n_features {
                        return Err(self.err(format!("feature index {feature} out of range")));
                    }
                    let test = match tok[2].as_str() {
                        "eq" => QuestionTest::Equals(self.num(tok.get(3), "category")?),
                        "le" => QuestionTest::AtMost(self.num(tok.get(3), "threshold")?),
                        other => return Err(self.err(format!("unknown test {other:?}"))),
                    };
                    Node::Split {
                        question: Question { feature, test },
                        yes: self.num(tok.get(4), "yes child")?,
                        no: self.num(tok.get(5), "no child")?,
                        count: self.num(tok.get(6), "count")?,
                        impurity: self.num(tok.get(7), "impurity")?,
                    }
                }
                _ => return Err(self.err(format!("expected a node, found {line:?}"))),
            };
            nodes.push(node);
        }
        RegressionTree::from_nodes(nodes, dim).map_err(|e| self.err(e.to_string()))
    }

    fn set(&mut self, nf: usize) -> Result<TreeSet, CartError> {
        let head = self.expect("set")?;
        match head.first().map(String::as_str) {
            Some("vector") => Ok(TreeSet::Vector(self.tree(nf)?)),
            Some("shape") => Ok(TreeSet::Shape {
                shape: self.tree(nf)?,
                meanstd: self.tree(nf)?,
            }),
            Some("scalar") => {
                let n: usize = self.num(head.get(1), "scalar tree count")?;
                Ok(TreeSet::Scalar((0..n).map(|_| self.tree(nf)).collect::<Result<_, _>>()?))
            }
            other => Err(self.err(format!("unknown tree set {other:?}"))),
        }
    }

    fn trees(&mut self, nf: usize) -> Result<ModelTrees, CartError> {
        let head = self.expect("trees")?;
        match head.first().map(String::as_str) {
            Some("single") => Ok(ModelTrees::Single(self.set(nf)?)),
            Some("pertone") => {
                let n: usize = self.num(head.get(1), "tone count")?;
                let mut by_tone = BTreeMap::new();
                for _ in 0..n {
                    let t = self.expect("tone")?;
                    let tone: u8 = self.num(t.first(), "tone")?;
                    by_tone.insert(tone, self.set(nf)?);
                }
                self.expect("fallback")?;
                let fallback = self.set(nf)?;
                Ok(ModelTrees::PerTone { by_tone, fallback })
            }
            Some("phrase") => Ok(ModelTrees::PhraseSyllable {
                phrase: self.tree(nf)?,
                syllable: self.set(nf)?,
            }),
            other => Err(self.err(format!("unknown tree layout {other:?}"))),
        }
    }

    fn indices(&self, toks: &[String], what: &str) -> Result<Vec<usize>, CartError> {
        toks.iter().map(|t| self.num(Some(t), what)).collect()
    }
}

pub fn read_dt_file<R: BufRead>(input: R) -> Result<DtFile, CartError> {
    let mut p = Parser { lines: Lines::new(input) };
    if p.line()? != DT_HEADER {
        return Err(p.err(format!("expected header `{DT_HEADER}`")));
    }
    let kind = p.expect("type")?;
    let arch = p.expect("arch")?;
    if arch.len() != 2 {
        return Err(p.err("arch line needs an architecture and a representation"));
    }
    let arch_kind: ArchKind = arch[0].parse().map_err(|e: String| p.err(e))?;
    let rep: RepresentationSpec = arch[1].parse().map_err(|e: String| p.err(e))?;
    let spec = ArchitectureSpec::new(arch_kind, rep).map_err(|e| p.err(e.to_string()))?;
    let nf: usize = {
        let f = p.expect("features")?;
        p.num(f.first(), "feature count")?
    };
    let mut defs = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = p.line()?;
        defs.push(FeatureSchema::parse_line(&line).map_err(|e| p.err(e))?);
    }
    let schema = FeatureSchema::new(defs).map_err(|e| p.err(e.to_string()))?;

    let file = match kind.first().map(String::as_str) {
        Some("model") => DtFile::Model(DTModel {
            spec,
            trees: p.trees(nf)?,
            schema,
        }),
        Some("forest") => {
            let m = p.expect("members")?;
            let n: usize = p.num(m.first(), "member count")?;
            let mut members = Vec::with_capacity(n);
            for i in 0..n {
                let idx = p.expect("member")?;
                if p.num::<usize>(idx.first(), "member index")? != i {
                    return Err(p.err(format!("expected member {i}")));
                }
                let mask = p.expect("mask")?;
                let feature_mask = p.indices(&mask, "feature index")?;
                let o = p.expect("outputs")?;
                let k: usize = p.num(o.first(), "output mask count")?;
                let mut output_masks = BTreeMap::new();
                for _ in 0..k {
                    let line = p.expect("output")?;
                    let dim: usize = p.num(line.first(), "output dimension")?;
                    output_masks.insert(dim, p.indices(&line[1..], "output index")?);
                }
                let trees = p.trees(nf)?;
                members.push(ForestMember {
                    feature_mask,
                    output_masks,
                    model: DTModel {
                        spec,
                        trees,
                        schema: schema.clone(),
                    },
                });
            }
            if members.is_empty() {
                return Err(p.err("forest has no members"));
            }
            DtFile::Forest(Forest { spec, members })
        }
        other => return Err(p.err(format!("unknown model type {other:?}"))),
    };
    if let Ok(Some(extra)) = p.lines.next_line() {
        let extra = extra.to_string();
        return Err(p.err(format!("unexpected trailing content {extra:?}")));
    }
    Ok(file)
}
