use std::collections::BTreeMap;

use crate::par;
use crate::trace::{Trace, TraceStatus};

/// Divisor used for standard deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StdKind {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n - 1.
    Sample,
}

impl StdKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StdKind::Population => "population",
            StdKind::Sample => "sample",
        }
    }
}

/// Count, sum, sum of squares, and max of integer observations. Integer
/// accumulation keeps merged results independent of how a collection was
/// partitioned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub n: u64,
    pub sum: u64,
    pub sum_sq: u128,
    pub max: u64,
}

impl Moments {
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x as u128 * x as u128;
        self.max = self.max.max(x);
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            max: self.max.max(other.max),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum as f64 / self.n as f64
        }
    }

    pub fn std(&self, kind: StdKind) -> f64 {
        let n = self.n as u128;
        let denom = match kind {
            StdKind::Population => n * n,
            StdKind::Sample => n * n.saturating_sub(1),
        };
        if denom == 0 {
            return 0.0;
        }
        // n * sum(x^2) - sum(x)^2 = n^2 * population variance, exactly
        let numer = n * self.sum_sq - self.sum as u128 * self.sum as u128;
        (numer as f64 / denom as f64).sqrt()
    }
}

/// Descriptive statistics of a trace collection. Query length is counted in
/// whitespace tokens over synthetic queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub traces: u64,
    pub answers: u64,
    pub search_calls: u64,
    pub trace_length_mean: f64,
    pub trace_length_std: f64,
    pub trace_length_max: u64,
    pub query_length_mean: f64,
    pub query_length_std: f64,
    pub status_counts: BTreeMap<TraceStatus, u64>,
    pub std_kind: StdKind,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    answers: u64,
    lengths: Moments,
    query_lengths: Moments,
    status: BTreeMap<TraceStatus, u64>,
}

impl Acc {
    fn add(mut self, t: &Trace) -> Self {
        if t.status == TraceStatus::Answered {
            self.answers += 1;
        }
        *self.status.entry(t.status).or_default() += 1;
        self.lengths.push(t.len() as u64);
        for q in t.synthetic_queries() {
            self.query_lengths.push(q.split_whitespace().count() as u64);
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        self.answers += other.answers;
        self.lengths = self.lengths.merge(other.lengths);
        self.query_lengths = self.query_lengths.merge(other.query_lengths);
        for (s, c) in other.status {
            *self.status.entry(s).or_default() += c;
        }
        self
    }

    fn finish(self, std_kind: StdKind) -> TraceStats {
        let lengths = self.lengths;
        TraceStats {
            traces: lengths.n,
            answers: self.answers,
            search_calls: self.query_lengths.n,
            trace_length_mean: lengths.mean(),
            trace_length_std: lengths.std(std_kind),
            trace_length_max: lengths.max,
            query_length_mean: self.query_lengths.mean(),
            query_length_std: self.query_lengths.std(std_kind),
            status_counts: self.status,
            std_kind,
        }
    }
}

pub fn trace_stats(traces: &[Trace], std_kind: StdKind) -> TraceStats {
    par::fold_merge(traces, Acc::default, Acc::add, Acc::merge).finish(std_kind)
}

pub fn trace_stats_sequential(traces: &[Trace], std_kind: StdKind) -> TraceStats {
    traces
        .iter()
        .fold(Acc::default(), Acc::add)
        .finish(std_kind)
}
