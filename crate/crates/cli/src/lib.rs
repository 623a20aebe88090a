//! The `f0lab` command-line driver.
//!
//! Settings come from an optional TOML file (`--config`), dotted
//! `--set key=value` overrides and a few per-command flags, in that order of
//! precedence (later wins). See [`config`] for the keys.

pub mod config;
pub mod predfile;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use f0lab::cart::{self, CartError, DtFile};
use f0lab::corpus::{self, Corpus, CorpusError};
use f0lab::eval::{self, EvalError};
use f0lab::neural::{self, NnError};
use f0lab::{Contour, CONTOUR_LEN};

use config::RunConfig;

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const MISSING_INPUT: i32 = 3;
    pub const MALFORMED_INPUT: i32 = 4;
    pub const SCHEMA_MISMATCH: i32 = 5;
    pub const DIVERGED: i32 = 6;
}

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other failure (including failure to write outputs)
  2  invalid command line or configuration
  3  missing or unreadable input file
  4  malformed input file
  5  model and corpus feature schemas do not match
  6  neural training diverged";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn input(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingFile(path.to_path_buf())
        } else {
            CliError::Input {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::MissingFile(_) | CliError::Input { .. } => exit::MISSING_INPUT,
            CliError::Malformed(_) => exit::MALFORMED_INPUT,
            CliError::SchemaMismatch(_) => exit::SCHEMA_MISMATCH,
            CliError::Diverged(_) => exit::DIVERGED,
            CliError::Output { .. } | CliError::Other(_) => exit::FAILURE,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::MissingFile { path } => CliError::MissingFile(path),
            CorpusError::Io { path, source } => CliError::Input { path, source },
            CorpusError::InvalidConfig(_) | CorpusError::InvalidRatios(_) => CliError::Config(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<CartError> for CliError {
    fn from(e: CartError) -> Self {
        match e {
            CartError::MissingFile { path } => CliError::MissingFile(path),
            CartError::Io { path, source } => CliError::Input { path, source },
            CartError::Parse { .. } | CartError::MalformedTree(_) | CartError::EmptyCorpus => CliError::Malformed(e.to_string()),
            CartError::FeatureCount { .. } | CartError::SchemaMismatch => CliError::SchemaMismatch(e.to_string()),
            CartError::InvalidConfig(_) | CartError::InvalidArchitecture(_) => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::MissingFile { path } => CliError::MissingFile(path),
            NnError::Io { path, source } => CliError::Input { path, source },
            NnError::Parse { .. } | NnError::EmptyCorpus | NnError::EmptySequence => CliError::Malformed(e.to_string()),
            NnError::FeatureCount { .. } | NnError::SchemaMismatch => CliError::SchemaMismatch(e.to_string()),
            NnError::InvalidConfig(_) => CliError::Config(e.to_string()),
            NnError::Diverged { .. } | NnError::NonFinite(_) => CliError::Diverged(e.to_string()),
            NnError::LengthMismatch { .. } => CliError::Other(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "f0lab", version, about = "Syllable f0 contour modelling experiments", after_help = EXIT_CODES)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set synth.noise_std_hz=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed (overrides the `seed` key).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic tone-language corpus.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Split a corpus into train/val/test files inside a directory.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Receives train.corpus, val.corpus and test.corpus.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train one tree-architecture model.
    TrainDt {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a randomized forest.
    TrainForest {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train a neural model (mlp, lstm, blstm or additive).
    TrainNn {
        /// Overrides `nn.kind`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of per-epoch losses.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Predict contours for every syllable of a corpus.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against a reference corpus.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export natural, base, residual and predicted contours of an additive
    /// model as CSV.
    PlotData {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one utterance id.
        #[arg(long)]
        utterance: Option<String>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr as one line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                println!("{msg}");
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("f0lab: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_corpus_file(corpus: &Corpus, path: &Path) -> Result<(), CliError> {
    corpus::save_corpus(corpus, path).map_err(|e| match e {
        CorpusError::Io { path, source } => CliError::Output { path, source },
        other => other.into(),
    })
}

fn load(path: &Path) -> Result<Corpus, CliError> {
    Ok(corpus::load_corpus(path)?)
}

/// Runs a parsed command and returns a one-line summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let seed_of = |s: &SeedArg| s.seed.unwrap_or(cfg.seed);
    match &cli.command {
        Command::GenData { out, seed } => {
            let c = corpus::generate_synthetic(&cfg.synth_config(seed_of(seed))?)?;
            write_corpus_file(&c, out)?;
            Ok(format!(
                "wrote {} utterances ({} syllables) to {}",
                c.utterances.len(),
                c.syllable_count(),
                out.display()
            ))
        }
        Command::Split { corpus, out_dir, seed } => {
            let c = load(corpus)?;
            let (tr, va, te) = corpus::split_corpus(&c, cfg.ratios()?, seed_of(seed))?;
            fs::create_dir_all(out_dir).map_err(|source| CliError::Output {
                path: out_dir.clone(),
                source,
            })?;
            for (name, part) in [("train", &tr), ("val", &va), ("test", &te)] {
                write_corpus_file(part, &out_dir.join(format!("{name}.corpus")))?;
            }
            Ok(format!(
                "split {} utterances into {}/{}/{}",
                c.utterances.len(),
                tr.utterances.len(),
                va.utterances.len(),
                te.utterances.len()
            ))
        }
        Command::TrainDt { train, out } => {
            let arch = cfg.architecture()?;
            let c = load(train)?;
            let model = cart::train_dt_model(&arch, &c, &cfg.tree_config()?)?;
            let n = model.tree_count();
            save_dt(&DtFile::Model(model), out)?;
            Ok(format!("trained {} {} ({n} trees)", arch.kind, arch.representation))
        }
        Command::TrainForest { train, out, seed } => {
            let arch = cfg.architecture()?;
            let c = load(train)?;
            let forest = cart::train_forest(&arch, &c, &cfg.forest_config(seed_of(seed))?)?;
            let n = forest.members.len();
            save_dt(&DtFile::Forest(forest), out)?;
            Ok(format!("trained {n}-member forest {} {}", arch.kind, arch.representation))
        }
        Command::TrainNn {
            kind,
            train,
            val,
            out,
            history,
            seed,
        } => {
            let kind = match kind {
                Some(k) => k.parse().map_err(CliError::Config)?,
                None => cfg.model_kind()?,
            };
            let seed = seed_of(seed);
            let tc = cfg.train_config(seed)?;
            let (tr, va) = (load(train)?, load(val)?);
            if va.schema != tr.schema {
                return Err(CliError::SchemaMismatch("validation and training corpora differ".into()));
            }
            let model = neural::NeuralModel::new(kind, cfg.net_dims()?, &tr, seed)?;
            let outcome = neural::train(model, &tr, &va, &tc)?;
            neural::save_neural(&outcome.model, out).map_err(|e| match e {
                NnError::Io { path, source } => CliError::Output { path, source },
                other => other.into(),
            })?;
            if let Some(h) = history {
                let mut s = String::from("epoch,train_loss,val_loss\n");
                for r in &outcome.history {
                    let _ = writeln!(s, "{},{},{}", r.epoch, r.train_loss, r.val_loss);
                }
                write_file(h, &s)?;
            }
            let best = outcome
                .history
                .iter()
                .find(|r| r.epoch == outcome.best_epoch)
                .map_or(f64::NAN, |r| r.val_loss);
            Ok(format!(
                "trained {kind} for {} epochs, best epoch {} (val loss {best})",
                outcome.history.len(),
                outcome.best_epoch
            ))
        }
        Command::Predict { model, corpus, out } => {
            let c = load(corpus)?;
            let rows = match load_model(model)? {
                AnyModel::Dt(m) => {
                    check_schema(m.schema(), &c)?;
                    c.utterances
                        .iter()
                        .map(|u| {
                            let p = match &m {
                                DtFile::Model(m) => cart::predict_dt_model(m, u)?,
                                DtFile::Forest(f) => cart::predict_forest(f, u)?,
                            };
                            Ok((u.id.clone(), p))
                        })
                        .collect::<Result<Vec<_>, CliError>>()?
                }
                AnyModel::Nn(m) => {
                    check_schema(Some(&m.schema), &c)?;
                    c.utterances
                        .iter()
                        .map(|u| {
                            let p = if u.syllables.is_empty() {
                                Vec::new()
                            } else {
                                neural::predict_neural(&m, u)?
                            };
                            Ok((u.id.clone(), p))
                        })
                        .collect::<Result<Vec<_>, CliError>>()?
                }
            };
            write_file(out, &predfile::format_predictions(&rows))?;
            Ok(format!("wrote predictions for {} utterances", rows.len()))
        }
        Command::Eval { pred, truth, out } => {
            let text = fs::read_to_string(pred).map_err(|e| CliError::input(pred, e))?;
            let mut p = predfile::parse_predictions(&text, pred)?;
            let t = load(truth)?;
            let mut aligned: Vec<Vec<Contour>> = Vec::with_capacity(t.utterances.len());
            for u in &t.utterances {
                let got = p.remove(&u.id).unwrap_or_default();
                if got.len() != u.syllables.len() {
                    return Err(CliError::Malformed(format!(
                        "utterance {}: {} predicted syllables, reference has {}",
                        u.id,
                        got.len(),
                        u.syllables.len()
                    )));
                }
                aligned.push(got);
            }
            if let Some(extra) = p.keys().min() {
                return Err(CliError::Malformed(format!("prediction for unknown utterance {extra}")));
            }
            let report = eval::evaluate(&aligned, &t)?;
            write_file(out, &report.to_kv_string())?;
            Ok(format!(
                "syl_rmse={} syl_corr={} utt_rmse={} utt_corr={}",
                report.syl_rmse, report.syl_corr, report.utt_rmse, report.utt_corr
            ))
        }
        Command::PlotData {
            model,
            corpus,
            out,
            utterance,
        } => {
            let m = match load_model(model)? {
                AnyModel::Nn(m) if m.kind == neural::ModelKind::Additive => m,
                _ => return Err(CliError::Config("plot-data needs an additive neural model".into())),
            };
            let c = load(corpus)?;
            check_schema(Some(&m.schema), &c)?;
            let selected: Vec<_> = c
                .utterances
                .iter()
                .filter(|u| utterance.as_ref().is_none_or(|id| &u.id == id))
                .filter(|u| !u.syllables.is_empty())
                .collect();
            if let Some(id) = utterance {
                if selected.is_empty() {
                    return Err(CliError::Config(format!("utterance {id} not found in corpus")));
                }
            }
            let mut s = String::from("utterance,syllable,point,natural,base,residual,predicted\n");
            for u in &selected {
                let b = neural::additive_forward(&m, u, f0lab::contour::DeltaKind::None)?;
                for (k, syl) in u.syllables.iter().enumerate() {
                    for i in 0..CONTOUR_LEN {
                        let _ = writeln!(
                            s,
                            "{},{k},{i},{},{},{},{}",
                            u.id, syl.contour[i], b.base[k][i], b.residual[k][i], b.total[k][i]
                        );
                    }
                }
            }
            write_file(out, &s)?;
            Ok(format!("wrote plot data for {} utterances", selected.len()))
        }
    }
}

fn save_dt(file: &DtFile, out: &Path) -> Result<(), CliError> {
    cart::save_dt_file(file, out).map_err(|e| match e {
        CartError::Io { path, source } => CliError::Output { path, source },
        other => other.into(),
    })
}

enum AnyModel {
    Dt(DtFile),
    Nn(neural::NeuralModel),
}

/// Dispatches on the file header.
fn load_model(path: &Path) -> Result<AnyModel, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    let mut first = String::new();
    BufReader::new(f)
        .read_line(&mut first)
        .map_err(|e| CliError::input(path, e))?;
    match first.trim() {
        cart::DT_HEADER => Ok(AnyModel::Dt(cart::load_dt_file(path)?)),
        neural::NN_HEADER => Ok(AnyModel::Nn(neural::load_neural(path)?)),
        other => Err(CliError::Malformed(format!(
            "{}: unrecognized model header {other:?}",
            path.display()
        ))),
    }
}

fn check_schema(model: Option<&f0lab::FeatureSchema>, corpus: &Corpus) -> Result<(), CliError> {
    match model {
        Some(s) if *s == corpus.schema => Ok(()),
        _ => Err(CliError::SchemaMismatch(
            "the corpus feature schema differs from the model's".into(),
        )),
    }
}
