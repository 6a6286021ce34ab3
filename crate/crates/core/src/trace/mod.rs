//! Frames, traces and their on-disk layout.
//!
//! A [`Frame`] records one iteration of an agentic run: the synthetic query the
//! agent issued, the ranked list the retriever returned for it, and any
//! reflective descriptions (thoughts, refinements) produced along the way. A
//! [`Trace`] is the ordered collection of frames of one run plus its answer.
//!
//! Traces are assembled with a [`TraceBuilder`], which enforces chronological
//! order, and become immutable once finalized.

mod codec;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{escape_field, unescape_field, CodecError};
pub use store::{
    StoreError, TraceStore, Violation, ANSWERS_FILE, META_FILE, QUERIES_FILE, RANKED_LISTS_FILE,
    THOUGHTS_FILE,
};

pub type DocId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptionKind {
    Thought,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    pub kind: DescriptionKind,
    pub text: String,
}

impl Description {
    pub fn thought(text: impl Into<String>) -> Self {
        Self {
            kind: DescriptionKind::Thought,
            text: text.into(),
        }
    }

    pub fn refinement(text: impl Into<String>) -> Self {
        Self {
            kind: DescriptionKind::Refinement,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedDoc {
    pub docid: DocId,
    /// 1-based.
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub iteration: u32,
    pub query: String,
    pub ranked_list: Vec<RankedDoc>,
    pub descriptions: Vec<Description>,
}

impl Frame {
    /// Builds a frame, assigning ranks 1..=n in the order the docids are given.
    pub fn new(
        iteration: u32,
        query: impl Into<String>,
        docids: impl IntoIterator<Item = DocId>,
        descriptions: Vec<Description>,
    ) -> Self {
        let ranked_list = docids
            .into_iter()
            .zip(1u32..)
            .map(|(docid, rank)| RankedDoc { docid, rank })
            .collect();
        Self {
            iteration,
            query: query.into(),
            ranked_list,
            descriptions,
        }
    }

    pub fn docids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.ranked_list.iter().map(|d| d.docid)
    }

    fn check(&self) -> Result<(), TraceError> {
        if self.query.is_empty() {
            return Err(TraceError::ContractViolation(format!(
                "frame {} has an empty query",
                self.iteration
            )));
        }
        for (expected, doc) in (1u32..).zip(&self.ranked_list) {
            if doc.rank != expected {
                return Err(TraceError::ContractViolation(format!(
                    "frame {} has rank {} where {} was expected",
                    self.iteration, doc.rank, expected
                )));
            }
        }
        Ok(())
    }
}

/// How an agentic run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Answered,
    ParseError,
    GeneratorError,
    IterationCap,
}

impl TraceStatus {
    pub const ALL: [TraceStatus; 4] = [
        TraceStatus::Answered,
        TraceStatus::ParseError,
        TraceStatus::GeneratorError,
        TraceStatus::IterationCap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Answered => "answered",
            TraceStatus::ParseError => "parse_error",
            TraceStatus::GeneratorError => "generator_error",
            TraceStatus::IterationCap => "iteration_cap",
        }
    }
}

impl std::fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Provenance kept in the per-trace `meta.json` sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceMeta {
    pub agent: Option<String>,
    pub retriever: Option<String>,
    /// Iterations whose re-ranker failed and fell back to first-stage order.
    pub rerank_fallbacks: Vec<u32>,
    /// Human-readable reason for an incomplete run.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub qid: String,
    pub initial_query: String,
    pub frames: Vec<Frame>,
    /// Descriptions produced in the final decoding loop, after the last
    /// search. They are logged at iteration `frames.len()`.
    pub closing_descriptions: Vec<Description>,
    pub answer: Option<String>,
    pub status: TraceStatus,
    pub meta: TraceMeta,
}

impl Trace {
    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.status == TraceStatus::Answered
    }

    pub fn synthetic_queries(&self) -> impl Iterator<Item = &str> + '_ {
        self.frames.iter().map(|f| f.query.as_str())
    }

    /// Checks every structural invariant of a finalized trace.
    pub fn validate(&self) -> Result<(), TraceError> {
        for (expected, frame) in (0u32..).zip(&self.frames) {
            if frame.iteration != expected {
                return Err(TraceError::OrderViolation {
                    expected,
                    found: frame.iteration,
                });
            }
            frame.check()?;
        }
        check_answer(self.answer.as_deref(), self.status)
    }
}

fn check_answer(answer: Option<&str>, status: TraceStatus) -> Result<(), TraceError> {
    match (answer.is_some(), status == TraceStatus::Answered) {
        (true, false) => Err(TraceError::ContractViolation(format!(
            "answer present with status {status}"
        ))),
        (false, true) => Err(TraceError::ContractViolation(
            "status answered without an answer".into(),
        )),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("frame iteration {found} appended where {expected} was expected")]
    OrderViolation { expected: u32, found: u32 },
    #[error("trace contract violated: {0}")]
    ContractViolation(String),
}

/// An in-progress trace.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    qid: String,
    initial_query: String,
    frames: Vec<Frame>,
    closing: Vec<Description>,
    meta: TraceMeta,
}

impl TraceBuilder {
    pub fn new(qid: impl Into<String>, initial_query: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            initial_query: initial_query.into(),
            frames: Vec::new(),
            closing: Vec::new(),
            meta: TraceMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn next_iteration(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn meta_mut(&mut self) -> &mut TraceMeta {
        &mut self.meta
    }

    pub fn append_frame(&mut self, frame: Frame) -> Result<(), TraceError> {
        let expected = self.next_iteration();
        if frame.iteration != expected {
            return Err(TraceError::OrderViolation {
                expected,
                found: frame.iteration,
            });
        }
        frame.check()?;
        self.frames.push(frame);
        Ok(())
    }

    /// Attaches a description to the most recent frame. Returns it back when
    /// no frame exists yet.
    pub fn attach_to_last(&mut self, description: Description) -> Result<(), Description> {
        match self.frames.last_mut() {
            Some(frame) => {
                frame.descriptions.push(description);
                Ok(())
            }
            None => Err(description),
        }
    }

    pub fn add_closing_description(&mut self, description: Description) {
        self.closing.push(description);
    }

    pub fn finalize(
        self,
        answer: Option<String>,
        status: TraceStatus,
    ) -> Result<Trace, TraceError> {
        check_answer(answer.as_deref(), status)?;
        Ok(Trace {
            qid: self.qid,
            initial_query: self.initial_query,
            frames: self.frames,
            closing_descriptions: self.closing,
            answer,
            status,
            meta: self.meta,
        })
    }
}
