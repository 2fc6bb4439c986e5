use clap::{Args, Parser, Subcommand, ValueEnum};
use masgraph::checker::EgMode;
use masgraph::kernel::MasGraph;
use masgraph::votecorpus::{self, Config, DeviationSet, Property, SpecName};
use masgraph_cli::bench::{default_deviations, BenchSpec};
use masgraph_cli::run::Row;
use masgraph_cli::{bench_matrix, emit, exit_code, markdown, run, write_csv};
use masgraph_cli::{AbstractionSource, ModelSource, Mode, QuerySource, RunError, RunSpec};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "masgraph-mc", version, about = "Model checker for multi-agent graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one property or query file.
    Check(CheckArgs),
    /// Run the configuration x property x mode matrix.
    Bench(BenchArgs),
    /// Serve the simulation API.
    Simulate(SimulateArgs),
    /// Write corpus files, abstraction specs and abstract-model layouts.
    Abstract(AbstractArgs),
}

#[derive(Args)]
struct Engine {
    /// Memory budget per search in MiB.
    #[arg(long, env = "MASGRAPH_MEM_BUDGET_MB", default_value_t = 2048)]
    mem_budget_mb: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Semantics of E[].
    #[arg(long, value_enum, default_value_t = Semantics::Maximal)]
    semantics: Semantics,
}

impl Engine {
    fn budget(&self) -> usize {
        self.mem_budget_mb.saturating_mul(1 << 20)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Semantics {
    Maximal,
    FiniteRun,
}

impl From<Semantics> for EgMode {
    fn from(s: Semantics) -> EgMode {
        match s {
            Semantics::Maximal => EgMode::Maximal,
            Semantics::FiniteRun => EgMode::FiniteRun,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Deviations {
    Honest,
    Voters,
    Offices,
    All,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Markdown,
    Json,
}

#[derive(Args)]
struct Indices {
    #[arg(long, default_value_t = 1)]
    voter: u32,
    #[arg(long, default_value_t = 1)]
    cand: u32,
    /// Office number; `n` means the office with agent id `-n`.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    office: i32,
}

impl Indices {
    fn office_id(&self) -> Result<i32, RunError> {
        match self.office {
            0 => Err(RunError::Invalid("offices are numbered from 1".into())),
            n if n > 0 => Ok(-n),
            n => Ok(n),
        }
    }
}

#[derive(Args)]
struct DeviationArgs {
    /// Enabled deviations; by default voter deviations, or office
    /// deviations for the office-blocking properties.
    #[arg(long, value_enum)]
    deviations: Option<Deviations>,
    /// Remove every deviation of this voter.
    #[arg(long)]
    honest_voter: Option<u32>,
    /// Fix the stamping strategy of --office against --cand.
    #[arg(long)]
    fixed_strategy: bool,
}

impl DeviationArgs {
    fn resolve(&self, prop: Option<&Property>, ix: &Indices) -> Result<DeviationSet, RunError> {
        let mut d = match (self.deviations, prop) {
            (Some(Deviations::Honest), _) => DeviationSet::honest(),
            (Some(Deviations::Voters), _) => DeviationSet::voters(),
            (Some(Deviations::Offices), _) => DeviationSet::offices(),
            (Some(Deviations::All), _) => DeviationSet::all(),
            (None, Some(p)) => default_deviations(p),
            (None, None) => DeviationSet::voters(),
        };
        if let Some(i) = self.honest_voter {
            d = d.with_honest_voter(i);
        }
        if self.fixed_strategy {
            d = d.with_fixed_strategy(ix.cand, ix.office_id()?);
        }
        Ok(d)
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Corpus configuration NV,NMO,NEC,NC.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    corpus: Option<Config>,
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Corpus property: bstuff, valvote, moblock_under, moblock_overover.
    #[arg(long, conflicts_with_all = ["query", "query_text"], required_unless_present_any = ["query", "query_text"])]
    prop: Option<String>,
    /// Query file.
    #[arg(long, conflicts_with = "query_text")]
    query: Option<PathBuf>,
    /// Query given inline.
    #[arg(long)]
    query_text: Option<String>,
    /// Run only this named query of the query file.
    #[arg(long, requires = "query")]
    query_name: Option<String>,
    /// Corpus spec name or `.abs` file.
    #[arg(long)]
    abstraction: Option<String>,
    #[command(flatten)]
    indices: Indices,
    #[command(flatten)]
    dev: DeviationArgs,
    #[command(flatten)]
    engine: Engine,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print the counterexample or witness.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Every configuration up to NV,NMO,NEC,NC.
    #[arg(long, conflicts_with = "corpus")]
    up_to: Option<Config>,
    /// A configuration; repeatable.
    #[arg(long)]
    corpus: Vec<Config>,
    #[arg(long, value_delimiter = ',', default_value = "bstuff,valvote,moblock_under,moblock_overover")]
    props: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "concrete,abstract")]
    modes: Vec<ModeArg>,
    #[command(flatten)]
    indices: Indices,
    #[command(flatten)]
    engine: Engine,
    /// Also write the CSV table here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the Markdown table here.
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Table printed on standard output.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Concrete,
    Abstract,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: std::net::SocketAddr,
    /// Steps of a verification trace included in job results.
    #[arg(long, default_value_t = 200)]
    trace_cap: usize,
    #[command(flatten)]
    engine: Engine,
}

#[derive(Args)]
struct AbstractArgs {
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    corpus: Option<Config>,
    #[arg(long, requires = "abstraction")]
    model: Option<PathBuf>,
    /// Corpus spec name or `.abs` file; repeatable. Defaults to every
    /// corpus spec.
    #[arg(long)]
    abstraction: Vec<String>,
    #[command(flatten)]
    indices: Indices,
    #[command(flatten)]
    dev: DeviationArgs,
    /// Output root; corpus files go to `<out>/<conf>/`.
    #[arg(long, default_value = "corpus")]
    out: PathBuf,
}

fn abstraction_source(s: &str, ix: &Indices) -> Result<AbstractionSource, RunError> {
    if s.ends_with(".abs") || Path::new(s).is_file() {
        return Ok(AbstractionSource::File(s.into()));
    }
    Ok(AbstractionSource::Named(SpecName::parse(s, ix.voter, ix.cand)?))
}

fn print_trace(out: &mut impl Write, g: &MasGraph, row: &Row) -> std::io::Result<()> {
    let Some(t) = &row.trace else {
        return Ok(());
    };
    writeln!(out, "  trace ({} steps)", t.len())?;
    let mut prev = &t.initial;
    for (i, (label, s)) in t.steps.iter().enumerate() {
        writeln!(out, "  {:>4}  {}", i + 1, g.label_text(label))?;
        for (name, value) in g.changed_values(prev, s) {
            writeln!(out, "          {name} = {value}")?;
        }
        prev = s;
    }
    if let Some(k) = t.loop_start {
        writeln!(out, "  loops back to step {k}")?;
    }
    Ok(())
}

fn emit_rows(out: &mut impl Write, rows: &[Row], format: Format) -> Result<(), Box<dyn std::error::Error>> {
    match format {
        Format::Csv => write_csv(rows, out)?,
        Format::Markdown => write!(out, "{}", markdown(rows))?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(rows)?)?,
        Format::Text => {
            for r in rows {
                let verdict = match (r.sat, &r.error) {
                    (_, Some(e)) => format!("error: {e}"),
                    (Some(b), _) => format!("{b} (conclusive)"),
                    (None, _) if r.memout => "out of memory".to_string(),
                    (None, _) => "inconclusive".to_string(),
                };
                writeln!(out, "{} {} {}: {verdict}", r.conf, r.property, r.mode)?;
                writeln!(
                    out,
                    "  states stored {}, explored {}, {:.3} s, {:.1} MiB",
                    r.states_stored, r.states_explored, r.time_s, r.mem_mb
                )?;
            }
        }
    }
    Ok(())
}

fn check(a: CheckArgs) -> Result<i32, Box<dyn std::error::Error>> {
    let ix = &a.indices;
    let prop = match &a.prop {
        Some(p) => Some(Property::parse(p, ix.voter, ix.cand, ix.office_id()?)?),
        None => None,
    };
    let model = match (&a.corpus, &a.model) {
        (Some(cfg), _) => ModelSource::Corpus {
            cfg: *cfg,
            dev: a.dev.resolve(prop.as_ref(), ix)?,
        },
        (None, Some(p)) => ModelSource::File(p.clone()),
        (None, None) => unreachable!("clap requires a model source"),
    };
    let query = match (prop, &a.query, &a.query_text) {
        (Some(p), _, _) => QuerySource::Property(p),
        (None, Some(path), _) => QuerySource::File {
            path: path.clone(),
            name: a.query_name.clone(),
        },
        (None, None, Some(q)) => QuerySource::Text(q.clone()),
        _ => unreachable!("clap requires a query source"),
    };
    let spec = RunSpec {
        model,
        query,
        abstraction: a.abstraction.as_deref().map(|s| abstraction_source(s, ix)).transpose()?,
        mem_budget: a.engine.budget(),
        threads: a.engine.threads,
        eg_mode: a.engine.semantics.into(),
    };
    let report = run(&spec)?;
    let mut out = std::io::stdout().lock();
    emit_rows(&mut out, &report.rows, a.format)?;
    if a.trace && a.format == Format::Text {
        for r in &report.rows {
            print_trace(&mut out, &report.model.graph, r)?;
        }
    }
    Ok(exit_code(&report.rows))
}

fn bench(a: BenchArgs) -> Result<i32, Box<dyn std::error::Error>> {
    let configs = match a.up_to {
        Some(c) => Config::up_to(c.nv, c.nmo, c.nec, c.nc),
        None => a.corpus.clone(),
    };
    let spec = BenchSpec {
        configs,
        properties: a.props.clone(),
        modes: a
            .modes
            .iter()
            .map(|m| match m {
                ModeArg::Concrete => Mode::Concrete,
                ModeArg::Abstract => Mode::Abstract,
            })
            .collect(),
        voter: a.indices.voter,
        cand: a.indices.cand,
        office: a.indices.office_id()?,
        mem_budget: a.engine.budget(),
        threads: a.engine.threads,
        eg_mode: a.engine.semantics.into(),
    };
    let rows = bench_matrix(&spec, &mut |r| {
        if let Some(e) = &r.error {
            eprintln!("{} {} {}: {e}", r.conf, r.property, r.mode);
        }
    });
    if let Some(p) = &a.csv {
        write_csv(&rows, std::fs::File::create(p)?)?;
    }
    if let Some(p) = &a.markdown {
        std::fs::write(p, markdown(&rows))?;
    }
    emit_rows(&mut std::io::stdout().lock(), &rows, a.format)?;
    Ok(0)
}

fn simulate(a: SimulateArgs) -> Result<i32, Box<dyn std::error::Error>> {
    let config = masgraph_service::ServiceConfig {
        trace_cap: a.trace_cap,
        mem_budget: a.engine.budget(),
        threads: a.engine.threads,
    };
    eprintln!("serving on http://{}/api/v1/", a.listen);
    tokio::runtime::Runtime::new()?.block_on(masgraph_service::serve(a.listen, config))?;
    Ok(0)
}

fn abstract_files(a: AbstractArgs) -> Result<i32, Box<dyn std::error::Error>> {
    let ix = &a.indices;
    let names: Vec<String> = if a.abstraction.is_empty() {
        ["bstuff_spec", "valvote_spec", "invalid_merge", "moblock_spec"].map(String::from).to_vec()
    } else {
        a.abstraction.clone()
    };
    let (model, dir, cfg) = match (&a.corpus, &a.model) {
        (Some(cfg), _) => {
            let dev = a.dev.resolve(None, ix)?;
            for p in votecorpus::write_corpus(&a.out, &[*cfg], &dev)? {
                println!("{}", p.display());
            }
            (votecorpus::load(cfg, &dev)?, votecorpus::corpus_dir(&a.out, cfg), Some(*cfg))
        }
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|source| RunError::Io { path: p.clone(), source })?;
            let m = masgraph::textlang::load_model(&text).map_err(|source| RunError::Load {
                path: p.display().to_string(),
                source,
            })?;
            (m, a.out.clone(), None)
        }
        (None, None) => unreachable!("clap requires a model source"),
    };
    for n in &names {
        let (stem, spec) = match abstraction_source(n, ix)? {
            AbstractionSource::File(p) => {
                let text = std::fs::read_to_string(&p).map_err(|source| RunError::Io { path: p.clone(), source })?;
                let spec = masgraph::abstraction::AbstractionSpec::parse(&text).map_err(|e| RunError::Load {
                    path: p.display().to_string(),
                    source: e.into(),
                })?;
                let stem = p.file_stem().map_or("spec".into(), |s| s.to_string_lossy().into_owned());
                (stem, spec)
            }
            AbstractionSource::Named(s) => {
                let cfg = cfg.ok_or_else(|| RunError::Invalid("named specs need --corpus".into()))?;
                (s.name().to_string(), votecorpus::abstraction_spec(&s, &cfg)?)
            }
        };
        for p in emit::write_abstraction(&dir, &stem, &model, &spec)? {
            println!("{}", p.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    // Usage errors exit with 1: 2 and 3 are verdict codes.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
        Command::Abstract(a) => abstract_files(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("masgraph-mc: {e}");
            ExitCode::from(1)
        }
    }
}
