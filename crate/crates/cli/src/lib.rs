//! `atk` command implementations. Each command returns a process exit code:
//! 0 on success, 2 for configuration or I/O problems, 3 for invalid data.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use atk_core::analysis::{self, report, StdKind};
use atk_core::orchestrator::{load_queries, run_batch, AgentProfile, Query};
use atk_core::protocol::{GeneratorEndpoint, GeneratorFactory, ScriptBook};
use atk_core::retrieval::{Bm25Retriever, Corpus, RetrieverConfig};
use atk_core::trace::{Trace, TraceStatus, TraceStore};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "atk", version, about = "Collect and analyze agentic retrieval traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one agentic search per query and store the traces.
    Trace(TraceArgs),
    /// Write an analysis report for a trace store.
    Analyze(AnalyzeArgs),
    /// Check every trace in a store against the schema and invariants.
    Validate(StoreArgs),
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Trace store root.
    #[arg(long, env = "ATK_STORE")]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// `qid<TAB>text` file with a header row.
    #[arg(long)]
    pub queries: PathBuf,
    /// JSON-lines corpus of `{"docid", "title", "text"}` records.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Agent profile JSON.
    #[arg(long)]
    pub profile: PathBuf,
    /// `cmd:<command line>`, `tcp:<host:port>`, or `mock:<script book JSON>`.
    #[arg(long)]
    pub generator: String,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, default_value_t = 3)]
    pub k_final: usize,
    #[arg(long, default_value_t = 1000)]
    pub k_first: usize,
    /// Whitespace tokens kept per document in the information block.
    #[arg(long, default_value_t = 512)]
    pub truncate: usize,
    /// Leave titles out of the index and the information block.
    #[arg(long)]
    pub no_titles: bool,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Report {
    Stats,
    Transitions,
    Iterations,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StdArg {
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValuesArg {
    Counts,
    Probabilities,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub report: Report,
    #[command(flatten)]
    pub store: StoreArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Analyze the readable traces even if some are corrupt.
    #[arg(long)]
    pub skip_corrupt: bool,
    /// Query file supplying initial queries for shards that do not record them.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StdArg::Population)]
    pub std: StdArg,
    /// Last iteration reported by `iterations`.
    #[arg(long, default_value_t = 10)]
    pub max_iteration: usize,
    /// Cell values written by `transitions`.
    #[arg(long, value_enum, default_value_t = ValuesArg::Probabilities)]
    pub values: ValuesArg,
    /// Reference matrix TSV shown next to the agent probabilities.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }

    fn data(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Runs a parsed command, writing its regular output to `out`. Problems are
/// reported on stderr.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Trace(args) => cmd_trace(&args, out),
        Command::Analyze(args) => cmd_analyze(&args, out),
        Command::Validate(args) => cmd_validate(&args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("atk: {f}");
            f.code
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::config(format!("{what} {} does not exist", path.display())))
    }
}

fn generator_factory(spec: &str) -> Result<Box<dyn GeneratorFactory>, Failure> {
    if let Some(path) = spec.strip_prefix("mock:") {
        let path = Path::new(path);
        require_file(path, "mock script")?;
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let book: ScriptBook = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        return Ok(Box::new(book));
    }
    let endpoint: GeneratorEndpoint = spec.parse().map_err(Failure::config)?;
    Ok(Box::new(endpoint))
}

pub fn cmd_trace(args: &TraceArgs, out: &mut dyn Write) -> Result<(), Failure> {
    require_file(&args.queries, "query file")?;
    require_file(&args.corpus, "corpus")?;
    require_file(&args.profile, "profile")?;
    if args.parallel == 0 {
        return Err(Failure::config("--parallel must be at least 1"));
    }
    let config = RetrieverConfig {
        k_first_stage: args.k_first,
        k_final: args.k_final,
        truncate_tokens: args.truncate,
        include_titles: !args.no_titles,
        ..RetrieverConfig::default()
    };
    config.validate().map_err(Failure::config)?;

    let profile = AgentProfile::load(&args.profile).map_err(Failure::config)?;
    let queries = load_queries(&args.queries).map_err(Failure::config)?;
    let factory = generator_factory(&args.generator)?;
    let corpus = Corpus::load(&args.corpus).map_err(Failure::config)?;
    let retriever = Bm25Retriever::new(corpus, config).map_err(Failure::config)?;
    let store = TraceStore::create(&args.store.store).map_err(Failure::config)?;

    let summary = run_batch(
        &queries,
        factory.as_ref(),
        &retriever,
        &profile,
        &store,
        args.parallel,
    )
    .map_err(Failure::data)?;

    let mut line: Vec<String> = TraceStatus::ALL
        .iter()
        .map(|s| format!("{s}={}", summary.status_counts.get(s).copied().unwrap_or(0)))
        .collect();
    line.push(format!("skipped={}", summary.skipped.len()));
    line.push(format!("failed={}", summary.failed.len()));
    writeln!(out, "{}", line.join(" ")).map_err(Failure::config)?;
    if summary.failed.is_empty() {
        Ok(())
    } else {
        let qids: Vec<&str> = summary.failed.iter().map(|(q, _)| q.as_str()).collect();
        Err(Failure::data(format!("no trace persisted for {}", qids.join(", "))))
    }
}

fn open_store(root: &Path) -> Result<TraceStore, Failure> {
    TraceStore::open(root).map_err(Failure::config)
}

/// Loads the analyzable traces of a store, applying the corrupt-shard policy
/// and filling in missing initial queries.
pub fn load_traces(
    root: &Path,
    skip_corrupt: bool,
    queries: Option<&Path>,
) -> Result<Vec<Trace>, Failure> {
    let store = open_store(root)?;
    let loaded = store.load_all().map_err(Failure::config)?;
    if !loaded.corrupt.is_empty() {
        for (_, violations) in &loaded.corrupt {
            for v in violations {
                eprintln!("{v}");
            }
        }
        let qids: Vec<&str> = loaded.corrupt.iter().map(|(q, _)| q.as_str()).collect();
        if !skip_corrupt {
            return Err(Failure::data(format!("corrupt traces: {}", qids.join(", "))));
        }
        log::warn!("skipping corrupt traces: {}", qids.join(", "));
    }
    let mut traces = loaded.traces;
    if let Some(path) = queries {
        require_file(path, "query file")?;
        let q0: HashMap<String, String> = load_queries(path)
            .map_err(Failure::config)?
            .into_iter()
            .map(|Query { qid, text }| (qid, text))
            .collect();
        for t in traces.iter_mut().filter(|t| t.initial_query.is_empty()) {
            if let Some(text) = q0.get(&t.qid) {
                t.initial_query = text.clone();
            }
        }
    }
    Ok(traces)
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let traces = load_traces(&args.store.store, args.skip_corrupt, args.queries.as_deref())?;
    let std_kind = match args.std {
        StdArg::Population => StdKind::Population,
        StdArg::Sample => StdKind::Sample,
    };
    let text = match args.report {
        Report::Stats => report::stats_tsv(&analysis::trace_stats(&traces, std_kind)),
        Report::Text => report::text_tsv(&analysis::text_stats(&traces)),
        Report::Iterations => {
            if args.max_iteration == 0 {
                return Err(Failure::config("--max-iteration must be at least 1"));
            }
            report::iterations_tsv(&analysis::per_iteration_distributions(&traces, args.max_iteration))
        }
        Report::Transitions => {
            let m = analysis::build_transition_matrix(&traces);
            match &args.reference {
                Some(path) => {
                    require_file(path, "reference matrix")?;
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                    let reference = report::parse_matrix_tsv(&text)
                        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                    report::matrix_comparison_tsv(&m, &reference)
                }
                None => {
                    let values = match args.values {
                        ValuesArg::Counts => report::MatrixValues::Counts,
                        ValuesArg::Probabilities => report::MatrixValues::Probabilities,
                    };
                    report::matrix_tsv(&m, values)
                }
            }
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display()))),
        None => out.write_all(text.as_bytes()).map_err(Failure::config),
    }
}

pub fn cmd_validate(args: &StoreArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let store = open_store(&args.store)?;
    let qids = store.qids().map_err(Failure::config)?;
    let violations = store.validate().map_err(Failure::config)?;
    for v in &violations {
        writeln!(out, "{v}").map_err(Failure::config)?;
    }
    if violations.is_empty() {
        writeln!(out, "ok: {} traces", qids.len()).map_err(Failure::config)?;
        Ok(())
    } else {
        Err(Failure::data(format!("{} violations", violations.len())))
    }
}
