//! Collection analyses: reformulation states and their transition matrix,
//! per-iteration dynamics, descriptive trace statistics, and text metrics.
//!
//! Everything here is a pure function of loaded traces. Collections can be
//! split, analyzed in parallel, and merged, since counts are additive.

mod matrix;
pub mod report;
mod stats;
mod text;

use std::fmt;

use thiserror::Error;

use crate::trace::Trace;

pub use matrix::{
    build_transition_matrix, build_transition_matrix_sequential, per_iteration_distributions,
    StateDistribution, TransitionMatrix,
};
pub use stats::{trace_stats, trace_stats_sequential, Moments, StdKind, TraceStats};
pub use text::{
    exact_repeat_rate, hapax_ratio, text_stats, wh_token_rate, wh_word_rate, within_trace_jaccard,
    TextStats, WH_WORDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReformulationState {
    In,
    Add,
    Rem,
    Rep,
    Dup,
    Ch,
    Out,
}

impl ReformulationState {
    pub const ALL: [ReformulationState; 7] = [
        ReformulationState::In,
        ReformulationState::Add,
        ReformulationState::Rem,
        ReformulationState::Rep,
        ReformulationState::Dup,
        ReformulationState::Ch,
        ReformulationState::Out,
    ];

    /// States a synthetic query can be assigned.
    pub const QUERY_STATES: [ReformulationState; 5] = [
        ReformulationState::Add,
        ReformulationState::Rem,
        ReformulationState::Rep,
        ReformulationState::Dup,
        ReformulationState::Ch,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReformulationState::In => "IN",
            ReformulationState::Add => "ADD",
            ReformulationState::Rem => "REM",
            ReformulationState::Rep => "REP",
            ReformulationState::Dup => "DUP",
            ReformulationState::Ch => "CH",
            ReformulationState::Out => "OUT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl fmt::Display for ReformulationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("classification needs at least the initial query in the history")]
    EmptyHistory,
}

/// Lowercased whitespace tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Lowercase with runs of whitespace collapsed to one space and trimmed.
pub fn normalize(text: &str) -> String {
    tokens(text).join(" ")
}

/// True when `needle` is an order-preserving subsequence of `hay` and
/// strictly shorter.
fn is_proper_subsequence(needle: &[String], hay: &[String]) -> bool {
    if needle.len() >= hay.len() {
        return false;
    }
    let mut rest = hay.iter();
    needle.iter().all(|t| rest.any(|h| h == t))
}

/// Assigns `query` a reformulation state relative to `history`, whose first
/// entry is the initial query and whose last entry is the previous query.
/// Precedence is REP, DUP, ADD, REM, then CH.
pub fn classify_state(query: &str, history: &[&str]) -> Result<ReformulationState, AnalysisError> {
    let (last, earlier) = history.split_last().ok_or(AnalysisError::EmptyHistory)?;
    let q = tokens(query);
    let prev = tokens(last);
    if q == prev {
        return Ok(ReformulationState::Rep);
    }
    if earlier.iter().any(|h| tokens(h) == q) {
        return Ok(ReformulationState::Dup);
    }
    if is_proper_subsequence(&prev, &q) {
        return Ok(ReformulationState::Add);
    }
    if is_proper_subsequence(&q, &prev) {
        return Ok(ReformulationState::Rem);
    }
    Ok(ReformulationState::Ch)
}

/// States of the synthetic queries of `trace`, in iteration order.
pub fn query_states(trace: &Trace) -> Vec<ReformulationState> {
    let mut history: Vec<Vec<String>> = vec![tokens(&trace.initial_query)];
    let mut states = Vec::with_capacity(trace.frames.len());
    for frame in &trace.frames {
        let q = tokens(&frame.query);
        let (last, earlier) = history.split_last().expect("history starts with q0");
        let state = if &q == last {
            ReformulationState::Rep
        } else if earlier.contains(&q) {
            ReformulationState::Dup
        } else if is_proper_subsequence(last, &q) {
            ReformulationState::Add
        } else if is_proper_subsequence(&q, last) {
            ReformulationState::Rem
        } else {
            ReformulationState::Ch
        };
        states.push(state);
        history.push(q);
    }
    states
}

/// Consecutive state pairs from IN through the query states to OUT. A trace
/// of N frames yields N + 1 pairs.
pub fn trace_transitions(trace: &Trace) -> Vec<(ReformulationState, ReformulationState)> {
    let mut seq = vec![ReformulationState::In];
    seq.extend(query_states(trace));
    seq.push(ReformulationState::Out);
    seq.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::trace::{Frame, Trace, TraceBuilder, TraceStatus};

    /// An answered trace with the given synthetic queries and no retrieval.
    pub fn trace(qid: &str, q0: &str, queries: &[&str]) -> Trace {
        trace_with_status(qid, q0, queries, TraceStatus::Answered)
    }

    pub fn trace_with_status(qid: &str, q0: &str, queries: &[&str], status: TraceStatus) -> Trace {
        let mut b = TraceBuilder::new(qid, q0);
        for (i, q) in queries.iter().enumerate() {
            b.append_frame(Frame::new(i as u32, *q, [i as u64], vec![]))
                .unwrap();
        }
        let answer = (status == TraceStatus::Answered).then(|| "a".to_string());
        b.finalize(answer, status).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::trace::TraceStatus;
    use proptest::prelude::*;
    use ReformulationState::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify_state("capital of france", &["capital of france"]), Ok(Rep));
        assert_eq!(classify_state("alpha", &["q0", "alpha", "beta"]), Ok(Dup));
        assert_eq!(classify_state("capital city of france", &["capital of france"]), Ok(Add));
        assert_eq!(classify_state("a c", &["a b c"]), Ok(Rem));
        assert_eq!(classify_state("france census", &["paris population"]), Ok(Ch));
        assert_eq!(classify_state("x", &[]), Err(AnalysisError::EmptyHistory));
    }

    #[test]
    fn normalization_ignores_case_and_spacing() {
        assert_eq!(normalize("  Capital\tOF\n france "), "capital of france");
        assert_eq!(classify_state("Capital  of France", &["capital of france"]), Ok(Rep));
        // order matters for subsequences
        assert_eq!(classify_state("c a", &["a b c"]), Ok(Ch));
    }

    #[test]
    fn transitions_examples() {
        let empty = trace("q", "x", &[]);
        assert_eq!(trace_transitions(&empty), vec![(In, Out)]);

        let t = trace(
            "q",
            "who won 2020 election",
            &["2020 election winner", "2020 election winner"],
        );
        assert_eq!(trace_transitions(&t), vec![(In, Ch), (Ch, Rep), (Rep, Out)]);

        let broken = trace_with_status("q", "who won", &["winner"], TraceStatus::ParseError);
        assert_eq!(trace_transitions(&broken).last(), Some(&(Ch, Out)));
    }

    fn query() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "A", "B"]), 1..5)
            .prop_map(|ts| ts.join(" "))
    }

    proptest! {
        #[test]
        fn query_states_agree_with_classify(q0 in query(), qs in prop::collection::vec(query(), 0..6)) {
            let refs: Vec<&str> = qs.iter().map(String::as_str).collect();
            let t = trace("q", &q0, &refs);
            let states = query_states(&t);
            let mut history = vec![q0.as_str()];
            for (q, st) in refs.iter().zip(&states) {
                prop_assert_eq!(classify_state(q, &history).unwrap(), *st);
                history.push(q);
            }
            prop_assert_eq!(trace_transitions(&t).len(), qs.len() + 1);
        }

        #[test]
        fn rep_dominates(q in query(), mut history in prop::collection::vec(query(), 0..4)) {
            history.push(q.to_uppercase());
            let refs: Vec<&str> = history.iter().map(String::as_str).collect();
            prop_assert_eq!(classify_state(&q, &refs).unwrap(), Rep);
        }
    }
}
