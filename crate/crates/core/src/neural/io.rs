//! `F0LAB-NN v1` text format.
//!
//! ```text
//! F0LAB-NN v1
//! kind <mlp|lstm|blstm|additive>
//! dims <lstm_hidden> <mlp_hidden_1> <mlp_hidden_2> <embed_dim>
//! features <F>
//! feature ...                               (F schema lines)
//! encoders <E>
//! encoder <slots>                           (E times, then one line per slot)
//! slot <feature> categorical <seen flags as 0/1 string>
//! slot <feature> numeric <mean> <std>
//! tensors <T>
//! tensor <name> <rows> <cols>               (T lines)
//! params
//! <values>                                  (row-major, one tensor row per line)
//! ```
//!
//! Parameters are written with 9 significant digits, so a reloaded model
//! matches the saved one to about 1e-9 relative precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::encoder::SlotStats;
use super::model::{ModelKind, NetDims, NeuralModel};
use super::NnError;
use crate::corpus::FeatureSchema;
use crate::textio::{fmt_exact, fmt_sig9, Lines};

pub const NN_HEADER: &str = "F0LAB-NN v1";

pub fn write_neural<W: Write>(model: &NeuralModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{NN_HEADER}")?;
    writeln!(out, "kind {}", model.kind)?;
    let d = &model.dims;
    writeln!(
        out,
        "dims {} {} {} {}",
        d.lstm_hidden, d.mlp_hidden[0], d.mlp_hidden[1], d.embed_dim
    )?;
    writeln!(out, "features {}", model.schema.len())?;
    for line in model.schema.to_lines() {
        writeln!(out, "{line}")?;
    }
    let stats = model.encoder_stats();
    writeln!(out, "encoders {}", stats.len())?;
    for enc in &stats {
        writeln!(out, "encoder {}", enc.len())?;
        for (feature, s) in enc {
            match s {
                SlotStats::Seen(seen) => {
                    let flags: String = seen.iter().map(|&b| if b { '1' } else { '0' }).collect();
                    writeln!(out, "slot {feature} categorical {flags}")?;
                }
                SlotStats::MeanStd(m, sd) => {
                    writeln!(out, "slot {feature} numeric {} {}", fmt_exact(*m), fmt_exact(*sd))?;
                }
            }
        }
    }
    let layout = model.layout();
    writeln!(out, "tensors {}", layout.tensors().len())?;
    for t in layout.tensors() {
        writeln!(out, "tensor {} {} {}", t.name, t.rows, t.cols)?;
    }
    writeln!(out, "params")?;
    for t in layout.tensors() {
        let p = &model.params[t.range()];
        for r in 0..t.rows {
            let row: Vec<String> = p[r * t.cols..(r + 1) * t.cols].iter().map(|&x| fmt_sig9(x)).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    out.flush()
}

pub fn save_neural(model: &NeuralModel, path: &Path) -> Result<(), NnError> {
    let io_err = |source| NnError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = File::create(path).map_err(io_err)?;
    write_neural(model, BufWriter::new(f)).map_err(io_err)
}

pub fn load_neural(path: &Path) -> Result<NeuralModel, NnError> {
    let f = File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            NnError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            NnError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    read_neural(BufReader::new(f))
}

struct Parser<R> {
    lines: Lines<R>,
}

impl<R: BufRead> Parser<R> {
    fn err(&self, message: impl Into<String>) -> NnError {
        NnError::Parse {
            line: self.lines.line_no(),
            message: message.into(),
        }
    }

    fn line(&mut self) -> Result<Option<String>, NnError> {
        self.lines
            .next_line()
            .map(|l| l.map(str::to_string))
            .map_err(|e| self.err(e.to_string()))
    }

    fn expect(&mut self, keyword: &str) -> Result<Vec<String>, NnError> {
        let line = self.line()?.ok_or_else(|| self.err("unexpected end of file"))?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, found {line:?}")));
        }
        Ok(tok.map(str::to_string).collect())
    }

    fn num<T: FromStr>(&self, tok: Option<&String>, what: &str) -> Result<T, NnError> {
        tok.ok_or_else(|| self.err(format!("missing {what}")))?
            .parse()
            .map_err(|_| self.err(format!("invalid {what}")))
    }
}

pub fn read_neural<R: BufRead>(input: R) -> Result<NeuralModel, NnError> {
    let mut p = Parser { lines: Lines::new(input) };
    if p.line()?.as_deref() != Some(NN_HEADER) {
        return Err(p.err(format!("expected header `{NN_HEADER}`")));
    }
    let k = p.expect("kind")?;
    let kind: ModelKind = k
        .first()
        .ok_or_else(|| p.err("missing model kind"))?
        .parse()
        .map_err(|e: String| p.err(e))?;
    let d = p.expect("dims")?;
    let dims = NetDims {
        lstm_hidden: p.num(d.first(), "lstm hidden size")?,
        mlp_hidden: [p.num(d.get(1), "mlp hidden size")?, p.num(d.get(2), "mlp hidden size")?],
        embed_dim: p.num(d.get(3), "embedding dimension")?,
    };
    let f = p.expect("features")?;
    let nf: usize = p.num(f.first(), "feature count")?;
    let mut defs = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = p.line()?.ok_or_else(|| p.err("unexpected end of file"))?;
        defs.push(FeatureSchema::parse_line(&line).map_err(|e| p.err(e))?);
    }
    let schema = FeatureSchema::new(defs).map_err(|e| p.err(e.to_string()))?;

    let e = p.expect("encoders")?;
    let n_enc: usize = p.num(e.first(), "encoder count")?;
    let mut stats = Vec::with_capacity(n_enc);
    for _ in 0..n_enc {
        let h = p.expect("encoder")?;
        let n_slots: usize = p.num(h.first(), "slot count")?;
        let mut slots = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            let s = p.expect("slot")?;
            let feature: usize = p.num(s.first(), "slot feature")?;
            if feature >= schema.len() {
                return Err(p.err(format!("slot feature {feature} out of range")));
            }
            let st = match s.get(1).map(String::as_str) {
                Some("categorical") => {
                    let flags = s.get(2).map(String::as_str).unwrap_or("");
                    if flags.is_empty() || !flags.chars().all(|c| c == '0' || c == '1') {
                        return Err(p.err("categorical slot needs a 0/1 flag string"));
                    }
                    SlotStats::Seen(flags.chars().map(|c| c == '1').collect())
                }
                Some("numeric") => SlotStats::MeanStd(p.num(s.get(2), "mean")?, p.num(s.get(3), "std")?),
                other => return Err(p.err(format!("unknown slot kind {other:?}"))),
            };
            slots.push((feature, st));
        }
        stats.push(slots);
    }

    let t = p.expect("tensors")?;
    let n_t: usize = p.num(t.first(), "tensor count")?;
    let mut shapes = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        let s = p.expect("tensor")?;
        let name = s.first().cloned().ok_or_else(|| p.err("missing tensor name"))?;
        shapes.push((name, p.num::<usize>(s.get(1), "rows")?, p.num::<usize>(s.get(2), "cols")?));
    }
    p.expect("params")?;
    let total: usize = shapes.iter().map(|(_, r, c)| r * c).sum();
    let mut params = Vec::with_capacity(total);
    while let Some(line) = p.line()? {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| p.err(format!("invalid parameter {tok:?}")))?;
            params.push(v);
        }
    }
    if params.len() != total {
        return Err(p.err(format!("expected {total} parameters, found {}", params.len())));
    }
    if let Some(i) = params.iter().position(|v| !v.is_finite()) {
        return Err(p.err(format!("parameter {i} is not finite")));
    }

    let model = NeuralModel::from_parts(kind, dims, schema, stats, params).map_err(|e| p.err(e.to_string()))?;
    let layout = model.layout().tensors();
    if layout.len() != shapes.len()
        || layout
            .iter()
            .zip(&shapes)
            .any(|(a, (n, r, c))| &a.name != n || a.rows != *r || a.cols != *c)
    {
        return Err(p.err("tensor list does not match the model structure"));
    }
    Ok(model)
}
