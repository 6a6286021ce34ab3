//! Batch execution over a query set, one agentic run per query.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use super::{run_arun, AgentProfile};
use crate::par;
use crate::protocol::GeneratorFactory;
use crate::retrieval::Retriever;
use crate::trace::{StoreError, TraceBuilder, TraceStatus, TraceStore};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

impl Query {
    pub fn new(qid: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("qid `{0}` appears more than once")]
    DuplicateQid(String),
    #[error("{path}:{line}: {message}")]
    Queries {
        path: String,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Reads a `qid<TAB>text` file with a header row. The text is taken
/// verbatim up to the end of the line.
pub fn load_queries(path: &Path) -> Result<Vec<Query>, BatchError> {
    let io_err = |source| BatchError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut queries = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if i == 0 || line.is_empty() {
            continue;
        }
        let (qid, text) = line.split_once('\t').ok_or_else(|| BatchError::Queries {
            path: path.display().to_string(),
            line: i + 1,
            message: "expected `qid<TAB>text`".into(),
        })?;
        queries.push(Query::new(qid, text));
    }
    Ok(queries)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub persisted: usize,
    /// Already in the store; not re-run.
    pub skipped: Vec<String>,
    /// Runs that could not produce a persisted trace, with the reason.
    pub failed: Vec<(String, String)>,
    pub status_counts: BTreeMap<TraceStatus, usize>,
    pub generator_calls: usize,
    pub search_calls: usize,
}

enum Outcome {
    Persisted {
        status: TraceStatus,
        generator_calls: usize,
        search_calls: usize,
    },
    Skipped,
    Failed(String),
}

fn run_one(
    query: &Query,
    factory: &dyn GeneratorFactory,
    retriever: &dyn Retriever,
    profile: &AgentProfile,
    store: &TraceStore,
) -> Outcome {
    if store.contains(&query.qid) {
        return Outcome::Skipped;
    }
    let (trace, generator_calls, search_calls) = match factory.connect(&query.qid) {
        Ok(mut generator) => {
            match run_arun(&query.qid, &query.text, &mut generator, retriever, profile) {
                Ok(out) => (out.trace, out.generator_calls, out.search_calls),
                Err(err) => return Outcome::Failed(err.to_string()),
            }
        }
        Err(err) => {
            let mut b = TraceBuilder::new(&query.qid, &query.text);
            b.meta_mut().agent = Some(profile.name.clone());
            b.meta_mut().retriever = Some(retriever.describe());
            b.meta_mut().error = Some(format!("cannot connect to generator: {err}"));
            let trace = b
                .finalize(None, TraceStatus::GeneratorError)
                .expect("no answer for an incomplete run");
            (trace, 0, 0)
        }
    };
    let status = trace.status;
    match store.write_trace(&trace) {
        Ok(()) => Outcome::Persisted {
            status,
            generator_calls,
            search_calls,
        },
        Err(StoreError::DuplicateTrace(_)) => Outcome::Skipped,
        Err(err) => Outcome::Failed(err.to_string()),
    }
}

/// Runs every query not already in `store` with up to `parallelism`
/// concurrent runs. A failing run never affects the others.
pub fn run_batch(
    queries: &[Query],
    factory: &dyn GeneratorFactory,
    retriever: &dyn Retriever,
    profile: &AgentProfile,
    store: &TraceStore,
    parallelism: usize,
) -> Result<BatchSummary, BatchError> {
    let mut seen = HashSet::new();
    for q in queries {
        if !seen.insert(q.qid.as_str()) {
            return Err(BatchError::DuplicateQid(q.qid.clone()));
        }
    }

    let outcomes = par::with_threads(parallelism, || {
        par::map(queries, |q| run_one(q, factory, retriever, profile, store))
    });

    let mut summary = BatchSummary::default();
    for (q, outcome) in queries.iter().zip(outcomes) {
        match outcome {
            Outcome::Persisted {
                status,
                generator_calls,
                search_calls,
            } => {
                summary.persisted += 1;
                *summary.status_counts.entry(status).or_default() += 1;
                summary.generator_calls += generator_calls;
                summary.search_calls += search_calls;
            }
            Outcome::Skipped => {
                log::warn!("{} is already in the store; skipping", q.qid);
                summary.skipped.push(q.qid.clone());
            }
            Outcome::Failed(reason) => {
                log::error!("{}: {reason}", q.qid);
                summary.failed.push((q.qid.clone(), reason));
            }
        }
    }
    Ok(summary)
}
