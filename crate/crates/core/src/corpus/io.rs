//! `F0LAB-CORPUS v1` text format.
//!
//! ```text
//! F0LAB-CORPUS v1
//! tones <id>...
//! features <F>
//! feature <name> <level> categorical <value>...
//! feature <name> <level> numeric <min> <max>
//! utterances <M>
//! utterance <id> words <W> phrases <P> syllables <S>
//! word <surface-id> <pos>                                  (W lines)
//! phrase <start> <end>                                     (P lines, half-open)
//! syllable <tone> <word> <phrase> | <10 f0 values> | <F feature values>
//! ```
//!
//! Floats are written with 9 significant digits. Blank lines and lines
//! starting with `#` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Corpus, CorpusError, FeatureSchema, PhraseSpan, SyllableRecord, UtteranceRecord, Word};
use crate::textio::{fmt_sig9, Lines};
use crate::CONTOUR_LEN;

pub const CORPUS_HEADER: &str = "F0LAB-CORPUS v1";

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CORPUS_HEADER}")?;
    let tones: Vec<String> = corpus.tone_inventory.iter().map(u8::to_string).collect();
    writeln!(out, "tones {}", tones.join(" "))?;
    writeln!(out, "features {}", corpus.schema.len())?;
    for line in corpus.schema.to_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "utterances {}", corpus.utterances.len())?;
    for u in &corpus.utterances {
        writeln!(
            out,
            "utterance {} words {} phrases {} syllables {}",
            u.id,
            u.words.len(),
            u.phrases.len(),
            u.syllables.len()
        )?;
        for w in &u.words {
            writeln!(out, "word {} {}", w.surface, w.pos)?;
        }
        for p in &u.phrases {
            writeln!(out, "phrase {} {}", p.start, p.end)?;
        }
        for s in &u.syllables {
            let contour: Vec<String> = s.contour.iter().map(|&v| fmt_sig9(v)).collect();
            let feats: Vec<String> = s
                .features
                .iter()
                .enumerate()
                .map(|(i, &v)| corpus.schema.format_value(i, v))
                .collect();
            writeln!(
                out,
                "syllable {} {} {} | {} | {}",
                s.tone,
                s.word_index,
                s.phrase_index,
                contour.join(" "),
                feats.join(" ")
            )?;
        }
    }
    out.flush()
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_corpus(corpus, BufWriter::new(file)).map_err(io_err)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

struct Reader<R> {
    lines: Lines<R>,
}

impl<R: BufRead> Reader<R> {
    fn malformed(&self, message: impl Into<String>) -> CorpusError {
        CorpusError::Malformed {
            line: self.lines.line_no(),
            message: message.into(),
        }
    }

    fn line(&mut self, what: &str) -> Result<String, CorpusError> {
        match self.lines.next_line() {
            Ok(Some(l)) => Ok(l.to_string()),
            Ok(None) => Err(CorpusError::Malformed {
                line: self.lines.line_no() + 1,
                message: format!("unexpected end of file, expected {what}"),
            }),
            Err(source) => Err(CorpusError::Io {
                path: Default::default(),
                source,
            }),
        }
    }

    /// Reads `<keyword> <count>`.
    fn counted(&mut self, keyword: &str) -> Result<usize, CorpusError> {
        let l = self.line(keyword)?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some(keyword) {
            return Err(self.malformed(format!("expected `{keyword} <count>`")));
        }
        let n = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.malformed(format!("bad count after `{keyword}`")))?;
        if tok.next().is_some() {
            return Err(self.malformed("trailing tokens"));
        }
        Ok(n)
    }

    fn parse_usize(&self, t: Option<&str>, what: &str) -> Result<usize, CorpusError> {
        t.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.malformed(format!("bad or missing {what}")))
    }

    fn utterance(&mut self, schema: &FeatureSchema) -> Result<UtteranceRecord, CorpusError> {
        let l = self.line("an utterance")?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 8 || tok[0] != "utterance" || tok[2] != "words" || tok[4] != "phrases" || tok[6] != "syllables"
        {
            return Err(self.malformed("expected `utterance <id> words <W> phrases <P> syllables <S>`"));
        }
        let id = tok[1].to_string();
        let n_words = self.parse_usize(Some(tok[3]), "word count")?;
        let n_phrases = self.parse_usize(Some(tok[5]), "phrase count")?;
        let n_syl = self.parse_usize(Some(tok[7]), "syllable count")?;

        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let l = self.line("a word")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 3 || tok[0] != "word" {
                return Err(self.malformed("expected `word <surface> <pos>`"));
            }
            let surface = tok[1]
                .parse()
                .map_err(|_| self.malformed(format!("bad word surface id {:?}", tok[1])))?;
            words.push(Word {
                surface,
                pos: tok[2].to_string(),
            });
        }
        let mut phrases = Vec::with_capacity(n_phrases);
        for _ in 0..n_phrases {
            let l = self.line("a phrase")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 3 || tok[0] != "phrase" {
                return Err(self.malformed("expected `phrase <start> <end>`"));
            }
            phrases.push(PhraseSpan {
                start: self.parse_usize(Some(tok[1]), "phrase start")?,
                end: self.parse_usize(Some(tok[2]), "phrase end")?,
            });
        }
        let mut syllables = Vec::with_capacity(n_syl);
        for k in 0..n_syl {
            let l = self.line("a syllable")?;
            let parts: Vec<&str> = l.split('|').collect();
            if parts.len() != 3 {
                return Err(self.malformed("expected `syllable <tone> <word> <phrase> | <f0...> | <features...>`"));
            }
            let head: Vec<&str> = parts[0].split_whitespace().collect();
            if head.len() != 4 || head[0] != "syllable" {
                return Err(self.malformed("expected `syllable <tone> <word> <phrase>`"));
            }
            let tone = head[1]
                .parse()
                .map_err(|_| self.malformed(format!("bad tone {:?}", head[1])))?;
            let word_index = self.parse_usize(Some(head[2]), "word index")?;
            let phrase_index = self.parse_usize(Some(head[3]), "phrase index")?;

            let values: Vec<f64> = parts[1]
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| self.malformed("non-numeric f0 value"))?;
            if values.len() != CONTOUR_LEN {
                return Err(CorpusError::SchemaViolation {
                    utterance: id.clone(),
                    syllable: Some(k),
                    field: "contour".into(),
                    message: format!("contour has {} values, expected {CONTOUR_LEN}", values.len()),
                });
            }
            let mut contour = [0.0; CONTOUR_LEN];
            contour.copy_from_slice(&values);

            let feat_tokens: Vec<&str> = parts[2].split_whitespace().collect();
            if feat_tokens.len() != schema.len() {
                return Err(CorpusError::SchemaViolation {
                    utterance: id.clone(),
                    syllable: Some(k),
                    field: "features".into(),
                    message: format!("expected {} feature values, found {}", schema.len(), feat_tokens.len()),
                });
            }
            let features = feat_tokens
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    schema.parse_value(i, t).map_err(|message| CorpusError::SchemaViolation {
                        utterance: id.clone(),
                        syllable: Some(k),
                        field: schema.get(i).name.clone(),
                        message,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            syllables.push(SyllableRecord {
                tone,
                features,
                contour,
                word_index,
                phrase_index,
            });
        }
        Ok(UtteranceRecord {
            id,
            syllables,
            words,
            phrases,
        })
    }
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Corpus, CorpusError> {
    let mut r = Reader {
        lines: Lines::new(input),
    };
    let header = r.line("the header")?;
    if header != CORPUS_HEADER {
        return Err(r.malformed(format!("expected header `{CORPUS_HEADER}`")));
    }
    let tones_line = r.line("the tone inventory")?;
    let mut tok = tones_line.split_whitespace();
    if tok.next() != Some("tones") {
        return Err(r.malformed("expected `tones <id>...`"));
    }
    let tone_inventory: Vec<u8> = tok
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| r.malformed("bad tone id"))?;

    let n_features = r.counted("features")?;
    let mut defs = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let l = r.line("a feature definition")?;
        defs.push(FeatureSchema::parse_line(&l).map_err(|m| r.malformed(m))?);
    }
    let schema = FeatureSchema::new(defs)?;

    let n_utt = r.counted("utterances")?;
    let mut utterances = Vec::with_capacity(n_utt);
    for _ in 0..n_utt {
        let u = r.utterance(&schema)?;
        u.validate(&schema, &tone_inventory)?;
        utterances.push(u);
    }
    if r.lines.next_line().ok().flatten().is_some() {
        return Err(r.malformed("trailing content after the last utterance"));
    }
    Ok(Corpus {
        schema,
        tone_inventory,
        utterances,
    })
}
