//! Single verification runs.

use masgraph::abstraction::{check_with_abstraction, AbsError, AbstractionSpec, Outcome};
use masgraph::checker::{self, CheckError, EgMode, Options, Stats, Trace};
use masgraph::textlang::{self, LoadError, Model};
use masgraph::votecorpus::{self, Config, DeviationSet, Property, SpecName, VoteError};
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Load { path: String, source: LoadError },
    #[error(transparent)]
    Vote(#[from] VoteError),
    #[error(transparent)]
    Abstraction(#[from] AbsError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("{0}")]
    Invalid(String),
}

pub enum ModelSource {
    File(PathBuf),
    Corpus { cfg: Config, dev: DeviationSet },
}

pub enum QuerySource {
    /// A query file; `name` picks one named query, otherwise all run.
    File { path: PathBuf, name: Option<String> },
    Text(String),
    Property(Property),
}

pub enum AbstractionSource {
    File(PathBuf),
    Named(SpecName),
}

/// Everything one `check` needs.
pub struct RunSpec {
    pub model: ModelSource,
    pub query: QuerySource,
    pub abstraction: Option<AbstractionSource>,
    pub mem_budget: usize,
    pub threads: usize,
    pub eg_mode: EgMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Concrete,
    Abstract,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Concrete => "concrete",
            Mode::Abstract => "abstract",
        })
    }
}

/// One report line.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub conf: String,
    pub property: String,
    pub mode: Mode,
    /// `None` if inconclusive, out of memory, or failed.
    pub sat: Option<bool>,
    pub conclusive: bool,
    pub memout: bool,
    pub states_stored: usize,
    pub states_explored: usize,
    pub time_s: f64,
    pub mem_mb: f64,
    /// Set when the row could not be computed at all.
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

impl Row {
    pub fn new(conf: &str, property: &str, mode: Mode) -> Row {
        Row {
            conf: conf.to_string(),
            property: property.to_string(),
            mode,
            sat: None,
            conclusive: false,
            memout: false,
            states_stored: 0,
            states_explored: 0,
            time_s: 0.0,
            mem_mb: 0.0,
            error: None,
            trace: None,
        }
    }

    fn with_stats(mut self, s: &Stats) -> Row {
        self.states_stored = s.states_stored;
        self.states_explored = s.states_explored;
        self.time_s = s.time_s;
        self.mem_mb = s.mem_bytes as f64 / (1 << 20) as f64;
        self
    }

    /// 0 conclusive, 2 inconclusive, 3 out of memory, 1 failed.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if self.conclusive {
            0
        } else if self.memout {
            3
        } else {
            2
        }
    }
}

/// The worst exit code of `rows`, ranked failed > memout > inconclusive.
pub fn exit_code(rows: &[Row]) -> i32 {
    let rank = |c: i32| match c {
        1 => 3,
        3 => 2,
        2 => 1,
        _ => 0,
    };
    rows.iter().map(Row::exit_code).max_by_key(|&c| rank(c)).unwrap_or(0)
}

/// The loaded model of a run, with the rows computed on it.
pub struct Report {
    pub model: Model,
    pub rows: Vec<Row>,
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_err(path: &Path) -> impl FnOnce(LoadError) -> RunError + '_ {
    move |source| RunError::Load {
        path: path.display().to_string(),
        source,
    }
}

pub fn run(spec: &RunSpec) -> Result<Report, RunError> {
    if spec.mem_budget == 0 {
        return Err(RunError::Invalid("memory budget must be positive".into()));
    }
    let (model, conf, cfg) = match &spec.model {
        ModelSource::File(p) => {
            let m = textlang::load_model(&read(p)?).map_err(load_err(p))?;
            let conf = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            (m, conf, None)
        }
        ModelSource::Corpus { cfg, dev } => (votecorpus::load(cfg, dev)?, cfg.to_string(), Some(*cfg)),
    };
    let corpus = || cfg.ok_or_else(|| RunError::Invalid("named properties and specs need a corpus model".into()));

    // (row label, query text)
    let queries: Vec<(String, String)> = match &spec.query {
        QuerySource::Text(q) => vec![(q.clone(), q.clone())],
        QuerySource::Property(p) => vec![(p.name().to_string(), p.query(&corpus()?)?)],
        QuerySource::File { path, name } => {
            let text = read(path)?;
            let all = textlang::load_queries(&model, &text).map_err(load_err(path))?;
            let picked: Vec<_> = all
                .into_iter()
                .filter(|q| name.is_none() || q.name == *name)
                .map(|q| (q.name.clone().unwrap_or_else(|| q.text.clone()), q.text))
                .collect();
            if picked.is_empty() {
                return Err(RunError::Invalid(match name {
                    Some(n) => format!("{}: no query named '{n}'", path.display()),
                    None => format!("{}: no queries", path.display()),
                }));
            }
            picked
        }
    };
    let abstraction = match &spec.abstraction {
        None => None,
        Some(AbstractionSource::File(p)) => Some(AbstractionSpec::parse(&read(p)?).map_err(|e| load_err(p)(e.into()))?),
        Some(AbstractionSource::Named(n)) => Some(votecorpus::abstraction_spec(n, &corpus()?)?),
    };
    let opts = Options {
        mem_budget: spec.mem_budget,
        threads: spec.threads.max(1),
        eg_mode: spec.eg_mode,
    };

    let mut rows = Vec::new();
    for (label, text) in queries {
        rows.push(match &abstraction {
            None => check_concrete(&model, &conf, &label, &text, &opts)?,
            Some(a) => check_abstract(&model, a, &conf, &label, &text, &opts)?,
        });
    }
    Ok(Report { model, rows })
}

fn check_concrete(m: &Model, conf: &str, label: &str, query: &str, opts: &Options) -> Result<Row, RunError> {
    let q = textlang::load_queries(m, query)
        .map_err(|source| RunError::Load {
            path: "query".into(),
            source,
        })?
        .into_iter()
        .next()
        .ok_or_else(|| RunError::Invalid("empty query".into()))?;
    let v = checker::check(&m.graph, &q.formula, opts)?;
    let mut row = Row::new(conf, label, Mode::Concrete).with_stats(&v.stats);
    row.sat = v.satisfied();
    row.conclusive = row.sat.is_some();
    row.memout = row.sat.is_none();
    row.trace = v.trace;
    Ok(row)
}

fn check_abstract(
    m: &Model,
    spec: &AbstractionSpec,
    conf: &str,
    label: &str,
    query: &str,
    opts: &Options,
) -> Result<Row, RunError> {
    let cv = check_with_abstraction(m, spec, query, opts)?;
    let mut stats = Stats::default();
    for e in &cv.evidence {
        stats.states_stored += e.verdict.stats.states_stored;
        stats.states_explored += e.verdict.stats.states_explored;
        stats.time_s += e.verdict.stats.time_s;
        stats.mem_bytes = stats.mem_bytes.max(e.verdict.stats.mem_bytes);
    }
    let mut row = Row::new(conf, label, Mode::Abstract).with_stats(&stats);
    row.sat = match cv.outcome {
        Outcome::True => Some(true),
        Outcome::False => Some(false),
        Outcome::Inconclusive => None,
    };
    row.conclusive = row.sat.is_some();
    row.memout = cv.memout && !row.conclusive;
    Ok(row)
}
