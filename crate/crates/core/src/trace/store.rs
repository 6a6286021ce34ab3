//! Sharded TSV persistence: one directory per trace, four artifact files plus
//! a `meta.json` sidecar.
//!
//! ```text
//! <root>/<qid>/answers.tsv       qid  answer
//! <root>/<qid>/queries.tsv       qid  iteration  llm_query
//! <root>/<qid>/thoughts.tsv      qid  iteration  thought
//! <root>/<qid>/ranked_lists.tsv  qid  iteration  docid  rank
//! <root>/<qid>/meta.json
//! ```
//!
//! Shards without `meta.json` are accepted on read: kinds default to thoughts
//! and the status is derived from the presence of an answer row.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::{escape_field, unescape_field};
use super::{
    Description, DescriptionKind, DocId, Frame, RankedDoc, Trace, TraceError, TraceMeta,
    TraceStatus,
};
use crate::par;

pub const ANSWERS_FILE: &str = "answers.tsv";
pub const QUERIES_FILE: &str = "queries.tsv";
pub const THOUGHTS_FILE: &str = "thoughts.tsv";
pub const RANKED_LISTS_FILE: &str = "ranked_lists.tsv";
pub const META_FILE: &str = "meta.json";

const ANSWERS_HEADER: &[&str] = &["qid", "answer"];
const QUERIES_HEADER: &[&str] = &["qid", "iteration", "llm_query"];
const THOUGHTS_HEADER: &[&str] = &["qid", "iteration", "thought"];
const RANKED_LISTS_HEADER: &[&str] = &["qid", "iteration", "docid", "rank"];

/// A problem found in one trace directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub qid: String,
    pub file: String,
    /// 1-based; the header is line 1.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.qid, self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("trace `{0}` already exists in the store")]
    DuplicateTrace(String),
    #[error("qid `{0}` cannot be used as a trace directory name")]
    InvalidQid(String),
    #[error("trace `{0}` not found in the store")]
    NotFound(String),
    #[error("corrupt trace: {0}")]
    CorruptTrace(Violation),
    #[error("refusing to store trace `{qid}`: {source}")]
    InvalidTrace {
        qid: String,
        #[source]
        source: TraceError,
    },
    #[error("storage error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    status: TraceStatus,
    #[serde(default)]
    initial_query: String,
    #[serde(default)]
    agent: Option<String>,
    #[serde(default)]
    retriever: Option<String>,
    #[serde(default)]
    description_kinds: Vec<DescriptionKind>,
    #[serde(default)]
    rerank_fallbacks: Vec<u32>,
    #[serde(default)]
    error: Option<String>,
}

/// Result of loading every trace under a store root.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub traces: Vec<Trace>,
    pub corrupt: Vec<(String, Vec<Violation>)>,
}

#[derive(Debug, Clone)]
pub struct TraceStore {
    root: PathBuf,
}

impl TraceStore {
    /// Opens a store, creating the root directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    /// Opens an existing store without creating anything.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let meta = fs::metadata(&root).map_err(io_err(&root))?;
        if !meta.is_dir() {
            return Err(StoreError::Io {
                source: io::Error::new(io::ErrorKind::NotADirectory, "store root is not a directory"),
                path: root,
            });
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn trace_dir(&self, qid: &str) -> PathBuf {
        self.root.join(qid)
    }

    pub fn contains(&self, qid: &str) -> bool {
        valid_qid(qid) && self.trace_dir(qid).is_dir()
    }

    /// Trace ids present in the store, sorted.
    pub fn qids(&self) -> Result<Vec<String>, StoreError> {
        let mut qids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let Ok(name) = entry.file_name().into_string() else {
                continue;
            };
            if name.starts_with('.') {
                continue;
            }
            if entry.file_type().map_err(io_err(&entry.path()))?.is_dir() {
                qids.push(name);
            }
        }
        qids.sort();
        Ok(qids)
    }

    /// Persists a finalized trace. The files are staged in a hidden directory
    /// and renamed into place so a crash never leaves a half-written trace.
    pub fn write_trace(&self, trace: &Trace) -> Result<(), StoreError> {
        if !valid_qid(&trace.qid) {
            return Err(StoreError::InvalidQid(trace.qid.clone()));
        }
        trace.validate().map_err(|source| StoreError::InvalidTrace {
            qid: trace.qid.clone(),
            source,
        })?;
        let target = self.trace_dir(&trace.qid);
        if target.exists() {
            return Err(StoreError::DuplicateTrace(trace.qid.clone()));
        }

        let staging = self
            .root
            .join(format!(".staging-{}-{}", trace.qid, std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        for (name, body) in render(trace) {
            let path = staging.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        if target.exists() {
            let _ = fs::remove_dir_all(&staging);
            return Err(StoreError::DuplicateTrace(trace.qid.clone()));
        }
        fs::rename(&staging, &target).map_err(|source| {
            let _ = fs::remove_dir_all(&staging);
            if target.exists() {
                StoreError::DuplicateTrace(trace.qid.clone())
            } else {
                StoreError::Io {
                    path: target.clone(),
                    source,
                }
            }
        })
    }

    pub fn read_trace(&self, qid: &str) -> Result<Trace, StoreError> {
        if !self.contains(qid) {
            return Err(StoreError::NotFound(qid.to_string()));
        }
        let (trace, mut violations) = self.inspect(qid)?;
        match trace {
            Some(trace) if violations.is_empty() => Ok(trace),
            _ => Err(StoreError::CorruptTrace(violations.remove(0))),
        }
    }

    /// Every invariant violation in one trace directory.
    pub fn validate_trace(&self, qid: &str) -> Result<Vec<Violation>, StoreError> {
        Ok(self.inspect(qid)?.1)
    }

    /// Validates every trace in the store, in qid order.
    pub fn validate(&self) -> Result<Vec<Violation>, StoreError> {
        let qids = self.qids()?;
        let results = par::map(&qids, |qid| self.validate_trace(qid));
        let mut all = Vec::new();
        for r in results {
            all.extend(r?);
        }
        Ok(all)
    }

    /// Loads every trace, separating corrupt ones out.
    pub fn load_all(&self) -> Result<LoadReport, StoreError> {
        let qids = self.qids()?;
        let results = par::map(&qids, |qid| self.inspect(qid));
        let mut report = LoadReport::default();
        for (qid, result) in qids.into_iter().zip(results) {
            match result? {
                (Some(trace), v) if v.is_empty() => report.traces.push(trace),
                (_, v) => report.corrupt.push((qid, v)),
            }
        }
        Ok(report)
    }

    fn inspect(&self, qid: &str) -> Result<(Option<Trace>, Vec<Violation>), StoreError> {
        let dir = self.trace_dir(qid);
        let mut reader = ShardReader::new(qid);
        let mut load = |name: &str| -> Result<Option<String>, StoreError> {
            let path = dir.join(name);
            match fs::read(&path) {
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(s) => Ok(Some(s)),
                    Err(_) => {
                        reader.flag(name, None, "file is not valid UTF-8");
                        Ok(None)
                    }
                },
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(io_err(&path)(e)),
            }
        };
        let answers = load(ANSWERS_FILE)?;
        let queries = load(QUERIES_FILE)?;
        let thoughts = load(THOUGHTS_FILE)?;
        let ranked = load(RANKED_LISTS_FILE)?;
        let meta = load(META_FILE)?;
        let trace = reader.assemble(
            answers.as_deref(),
            queries.as_deref(),
            thoughts.as_deref(),
            ranked.as_deref(),
            meta.as_deref(),
        );
        Ok((trace, reader.violations))
    }
}

fn valid_qid(qid: &str) -> bool {
    !qid.is_empty()
        && !qid.starts_with('.')
        && !qid.contains(['/', '\\', '\0'])
        && Path::new(qid).components().count() == 1
}

fn push_row(out: &mut String, fields: &[&str]) {
    for (i, field) in fields.iter().enumerate() {
        if i > 0 {
            out.push('\t');
        }
        out.push_str(&escape_field(field));
    }
    out.push('\n');
}

fn render(trace: &Trace) -> [(&'static str, String); 5] {
    let qid = trace.qid.as_str();

    let mut answers = String::new();
    push_row(&mut answers, ANSWERS_HEADER);
    if let Some(answer) = &trace.answer {
        push_row(&mut answers, &[qid, answer]);
    }

    let mut queries = String::new();
    push_row(&mut queries, QUERIES_HEADER);
    let mut thoughts = String::new();
    push_row(&mut thoughts, THOUGHTS_HEADER);
    let mut ranked = String::new();
    push_row(&mut ranked, RANKED_LISTS_HEADER);
    let mut kinds = Vec::new();

    for frame in &trace.frames {
        let it = frame.iteration.to_string();
        push_row(&mut queries, &[qid, &it, &frame.query]);
        for d in &frame.descriptions {
            push_row(&mut thoughts, &[qid, &it, &d.text]);
            kinds.push(d.kind);
        }
        for doc in &frame.ranked_list {
            push_row(
                &mut ranked,
                &[qid, &it, &doc.docid.to_string(), &doc.rank.to_string()],
            );
        }
    }
    let closing_it = trace.frames.len().to_string();
    for d in &trace.closing_descriptions {
        push_row(&mut thoughts, &[qid, &closing_it, &d.text]);
        kinds.push(d.kind);
    }

    let meta = MetaFile {
        status: trace.status,
        initial_query: trace.initial_query.clone(),
        agent: trace.meta.agent.clone(),
        retriever: trace.meta.retriever.clone(),
        description_kinds: kinds,
        rerank_fallbacks: trace.meta.rerank_fallbacks.clone(),
        error: trace.meta.error.clone(),
    };
    let mut meta = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta.push('\n');

    [
        (ANSWERS_FILE, answers),
        (QUERIES_FILE, queries),
        (THOUGHTS_FILE, thoughts),
        (RANKED_LISTS_FILE, ranked),
        (META_FILE, meta),
    ]
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

/// Parses one trace directory, collecting every violation it finds rather
/// than stopping at the first.
struct ShardReader<'a> {
    qid: &'a str,
    violations: Vec<Violation>,
}

impl<'a> ShardReader<'a> {
    fn new(qid: &'a str) -> Self {
        Self {
            qid,
            violations: Vec::new(),
        }
    }

    fn flag(&mut self, file: &str, line: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            qid: self.qid.to_string(),
            file: file.to_string(),
            line,
            message: message.into(),
        });
    }

    fn rows(&mut self, file: &str, content: Option<&str>, header: &[&str]) -> Option<Vec<Row>> {
        let Some(content) = content else {
            self.flag(file, None, "missing file");
            return None;
        };
        let body = content.strip_suffix('\n').unwrap_or(content);
        let mut lines = body.split('\n');
        let head = lines.next().unwrap_or("");
        if head.split('\t').ne(header.iter().copied()) {
            self.flag(
                file,
                Some(1),
                format!("expected header `{}`", header.join("\\t")),
            );
            return None;
        }
        if body.len() == head.len() {
            return Some(Vec::new());
        }
        let mut rows = Vec::new();
        for (line, raw) in (2..).zip(lines) {
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != header.len() {
                self.flag(
                    file,
                    Some(line),
                    format!("expected {} columns, found {}", header.len(), cols.len()),
                );
                continue;
            }
            let mut fields = Vec::with_capacity(cols.len());
            let mut ok = true;
            for col in cols {
                match unescape_field(col) {
                    Ok(f) => fields.push(f.into_owned()),
                    Err(e) => {
                        self.flag(file, Some(line), e.to_string());
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            if fields[0] != self.qid {
                self.flag(
                    file,
                    Some(line),
                    format!("row belongs to qid `{}`", fields[0]),
                );
                continue;
            }
            rows.push(Row { line, fields });
        }
        Some(rows)
    }

    fn int<T: std::str::FromStr>(&mut self, file: &str, row: &Row, col: usize, name: &str) -> Option<T> {
        match row.fields[col].parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.flag(
                    file,
                    Some(row.line),
                    format!("{name} `{}` is not a non-negative integer", row.fields[col]),
                );
                None
            }
        }
    }

    fn assemble(
        &mut self,
        answers: Option<&str>,
        queries: Option<&str>,
        thoughts: Option<&str>,
        ranked: Option<&str>,
        meta: Option<&str>,
    ) -> Option<Trace> {
        let answer_rows = self.rows(ANSWERS_FILE, answers, ANSWERS_HEADER);
        let query_rows = self.rows(QUERIES_FILE, queries, QUERIES_HEADER);
        let thought_rows = self.rows(THOUGHTS_FILE, thoughts, THOUGHTS_HEADER);
        let ranked_rows = self.rows(RANKED_LISTS_FILE, ranked, RANKED_LISTS_HEADER);

        let meta: Option<MetaFile> = meta.and_then(|m| match serde_json::from_str(m) {
            Ok(meta) => Some(meta),
            Err(e) => {
                self.flag(META_FILE, Some(e.line()), format!("invalid meta.json: {e}"));
                None
            }
        });

        let mut frames: Vec<Frame> = Vec::new();
        for row in query_rows.iter().flatten() {
            let Some(it) = self.int::<u32>(QUERIES_FILE, row, 1, "iteration") else {
                continue;
            };
            let expected = frames.len() as u32;
            if it != expected {
                self.flag(
                    QUERIES_FILE,
                    Some(row.line),
                    format!("iteration {it} where {expected} was expected"),
                );
                continue;
            }
            if row.fields[2].is_empty() {
                self.flag(QUERIES_FILE, Some(row.line), "empty llm_query");
            }
            frames.push(Frame::new(it, row.fields[2].clone(), [], Vec::new()));
        }

        let n = frames.len() as u32;
        let mut prev: Option<(u32, u32)> = None;
        for row in ranked_rows.iter().flatten() {
            let it = self.int::<u32>(RANKED_LISTS_FILE, row, 1, "iteration");
            let docid = self.int::<DocId>(RANKED_LISTS_FILE, row, 2, "docid");
            let rank = self.int::<u32>(RANKED_LISTS_FILE, row, 3, "rank");
            let (Some(it), Some(docid), Some(rank)) = (it, docid, rank) else {
                continue;
            };
            if it >= n {
                self.flag(
                    RANKED_LISTS_FILE,
                    Some(row.line),
                    format!("iteration {it} has no synthetic query"),
                );
                continue;
            }
            let expected_rank = match prev {
                Some((p, _)) if it < p => {
                    self.flag(
                        RANKED_LISTS_FILE,
                        Some(row.line),
                        format!("iteration {it} follows iteration {p}"),
                    );
                    continue;
                }
                Some((p, r)) if p == it => r + 1,
                _ => 1,
            };
            if rank != expected_rank {
                self.flag(
                    RANKED_LISTS_FILE,
                    Some(row.line),
                    format!("rank {rank} where {expected_rank} was expected"),
                );
                continue;
            }
            prev = Some((it, rank));
            frames[it as usize].ranked_list.push(RankedDoc { docid, rank });
        }

        let thought_rows = thought_rows.unwrap_or_default();
        let kinds: Vec<DescriptionKind> = match &meta {
            Some(m) => {
                if m.description_kinds.len() != thought_rows.len() {
                    self.flag(
                        META_FILE,
                        None,
                        format!(
                            "{} description kinds for {} thought rows",
                            m.description_kinds.len(),
                            thought_rows.len()
                        ),
                    );
                }
                m.description_kinds.clone()
            }
            None => Vec::new(),
        };
        let mut closing = Vec::new();
        let mut last_it = 0;
        for (idx, row) in thought_rows.iter().enumerate() {
            let Some(it) = self.int::<u32>(THOUGHTS_FILE, row, 1, "iteration") else {
                continue;
            };
            if it > n {
                self.flag(
                    THOUGHTS_FILE,
                    Some(row.line),
                    format!("iteration {it} is beyond the trace length {n}"),
                );
                continue;
            }
            if it < last_it {
                self.flag(
                    THOUGHTS_FILE,
                    Some(row.line),
                    format!("iteration {it} follows iteration {last_it}"),
                );
                continue;
            }
            last_it = it;
            let description = Description {
                kind: kinds.get(idx).copied().unwrap_or(DescriptionKind::Thought),
                text: row.fields[2].clone(),
            };
            if it == n {
                closing.push(description);
            } else {
                frames[it as usize].descriptions.push(description);
            }
        }

        let answer_rows = answer_rows.unwrap_or_default();
        if let Some(extra) = answer_rows.get(1) {
            self.flag(ANSWERS_FILE, Some(extra.line), "more than one answer row");
        }
        let answer = answer_rows.into_iter().next().map(|mut r| r.fields.swap_remove(1));

        let status = match &meta {
            Some(m) => {
                if (m.status == TraceStatus::Answered) != answer.is_some() {
                    self.flag(
                        ANSWERS_FILE,
                        None,
                        format!(
                            "status {} is inconsistent with {} answer row",
                            m.status,
                            if answer.is_some() { "an" } else { "no" }
                        ),
                    );
                }
                m.status
            }
            None if answer.is_some() => TraceStatus::Answered,
            None => TraceStatus::ParseError,
        };

        if query_rows.is_none() || !self.violations.is_empty() {
            return None;
        }
        let (initial_query, meta) = match meta {
            Some(m) => (
                m.initial_query,
                TraceMeta {
                    agent: m.agent,
                    retriever: m.retriever,
                    rerank_fallbacks: m.rerank_fallbacks,
                    error: m.error,
                },
            ),
            None => (String::new(), TraceMeta::default()),
        };
        Some(Trace {
            qid: self.qid.to_string(),
            initial_query,
            frames,
            closing_descriptions: closing,
            answer,
            status,
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceBuilder;

    fn sample(qid: &str) -> Trace {
        let mut b = TraceBuilder::new(qid, "organic question");
        b.append_frame(Frame::new(
            0,
            "first\tquery",
            [7, 3, 9],
            vec![Description::thought("plan")],
        ))
        .unwrap();
        b.append_frame(Frame::new(1, "second", [], vec![])).unwrap();
        b.attach_to_last(Description::refinement("nothing found")).unwrap();
        b.add_closing_description(Description::thought("done"));
        b.meta_mut().agent = Some("agent".into());
        b.finalize(Some("42".into()), TraceStatus::Answered).unwrap()
    }

    #[test]
    fn writes_exact_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q7")).unwrap();
        let read = |f: &str| fs::read_to_string(dir.path().join("q7").join(f)).unwrap();
        assert_eq!(read(ANSWERS_FILE), "qid\tanswer\nq7\t42\n");
        assert_eq!(
            read(QUERIES_FILE),
            "qid\titeration\tllm_query\nq7\t0\tfirst\\tquery\nq7\t1\tsecond\n"
        );
        assert_eq!(
            read(THOUGHTS_FILE),
            "qid\titeration\tthought\nq7\t0\tplan\nq7\t1\tnothing found\nq7\t2\tdone\n"
        );
        assert_eq!(
            read(RANKED_LISTS_FILE),
            "qid\titeration\tdocid\trank\nq7\t0\t7\t1\nq7\t0\t3\t2\nq7\t0\t9\t3\n"
        );
        assert_eq!(store.read_trace("q7").unwrap(), sample("q7"));
    }

    #[test]
    fn zero_frame_trace_has_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        let t = TraceBuilder::new("d", "q")
            .finalize(Some("A".into()), TraceStatus::Answered)
            .unwrap();
        store.write_trace(&t).unwrap();
        let q = fs::read_to_string(dir.path().join("d").join(QUERIES_FILE)).unwrap();
        assert_eq!(q, "qid\titeration\tllm_query\n");
        assert_eq!(store.read_trace("d").unwrap(), t);
    }

    #[test]
    fn unanswered_trace_has_no_answer_row() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        let t = TraceBuilder::new("p", "q")
            .finalize(None, TraceStatus::IterationCap)
            .unwrap();
        store.write_trace(&t).unwrap();
        let a = fs::read_to_string(dir.path().join("p").join(ANSWERS_FILE)).unwrap();
        assert_eq!(a, "qid\tanswer\n");
        assert_eq!(store.read_trace("p").unwrap().status, TraceStatus::IterationCap);
    }

    #[test]
    fn duplicate_and_invalid_qids() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        assert!(matches!(
            store.write_trace(&sample("q1")),
            Err(StoreError::DuplicateTrace(_))
        ));
        for bad in ["", "..", ".hidden", "a/b"] {
            assert!(matches!(
                store.write_trace(&sample(bad)),
                Err(StoreError::InvalidQid(_))
            ));
        }
        assert_eq!(store.qids().unwrap(), vec!["q1".to_string()]);
    }

    #[test]
    fn missing_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        fs::remove_file(dir.path().join("q1").join(RANKED_LISTS_FILE)).unwrap();
        match store.read_trace("q1") {
            Err(StoreError::CorruptTrace(v)) => {
                assert_eq!(v.file, RANKED_LISTS_FILE);
                assert_eq!(v.message, "missing file");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_integer_iteration_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        fs::write(
            dir.path().join("q1").join(QUERIES_FILE),
            "qid\titeration\tllm_query\nq1\t0\tfirst\nq1\tone\tsecond\n",
        )
        .unwrap();
        match store.read_trace("q1") {
            Err(StoreError::CorruptTrace(v)) => {
                assert_eq!(v.file, QUERIES_FILE);
                assert_eq!(v.line, Some(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_lists_every_violation() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        let qdir = dir.path().join("q1");
        fs::write(
            qdir.join(QUERIES_FILE),
            "qid\titeration\tllm_query\nq1\t0\tfirst\nq1\t2\tsecond\n",
        )
        .unwrap();
        fs::write(
            qdir.join(RANKED_LISTS_FILE),
            "qid\titeration\tdocid\trank\nq1\t0\t7\t1\nq1\t0\t3\t3\nq2\t0\t1\t3\n",
        )
        .unwrap();
        let v = store.validate().unwrap();
        let lines: Vec<_> = v.iter().map(|v| (v.file.as_str(), v.line)).collect();
        assert!(lines.contains(&(QUERIES_FILE, Some(3))));
        assert!(lines.contains(&(RANKED_LISTS_FILE, Some(3))));
        assert!(lines.contains(&(RANKED_LISTS_FILE, Some(4))));
    }

    #[test]
    fn status_mismatch_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        fs::write(dir.path().join("q1").join(ANSWERS_FILE), "qid\tanswer\n").unwrap();
        assert!(matches!(
            store.read_trace("q1"),
            Err(StoreError::CorruptTrace(_))
        ));
    }

    #[test]
    fn shard_without_meta_is_readable() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("q1")).unwrap();
        fs::remove_file(dir.path().join("q1").join(META_FILE)).unwrap();
        let t = store.read_trace("q1").unwrap();
        assert_eq!(t.status, TraceStatus::Answered);
        assert_eq!(t.len(), 2);
        assert!(t.initial_query.is_empty());
        assert!(t
            .frames
            .iter()
            .flat_map(|f| &f.descriptions)
            .all(|d| d.kind == DescriptionKind::Thought));
    }

    #[test]
    fn load_all_separates_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = TraceStore::create(dir.path()).unwrap();
        store.write_trace(&sample("a")).unwrap();
        store.write_trace(&sample("b")).unwrap();
        fs::remove_file(dir.path().join("b").join(ANSWERS_FILE)).unwrap();
        let report = store.load_all().unwrap();
        assert_eq!(report.traces.len(), 1);
        assert_eq!(report.corrupt.len(), 1);
        assert_eq!(report.corrupt[0].0, "b");
    }
}
