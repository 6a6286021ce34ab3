use std::ops::{Add, AddAssign};

use super::{query_states, trace_transitions, ReformulationState};
use crate::par;
use crate::trace::Trace;

const N: usize = ReformulationState::ALL.len();

/// Transition counts between reformulation states, rows are from-states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionMatrix {
    pub counts: [[u64; N]; N],
}

impl TransitionMatrix {
    pub fn record(&mut self, from: ReformulationState, to: ReformulationState) {
        self.counts[from.index()][to.index()] += 1;
    }

    pub fn add_trace(&mut self, trace: &Trace) {
        for (from, to) in trace_transitions(trace) {
            self.record(from, to);
        }
    }

    pub fn count(&self, from: ReformulationState, to: ReformulationState) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalized counts. Rows without outgoing transitions stay zero.
    pub fn probabilities(&self) -> [[f64; N]; N] {
        let mut p = [[0.0; N]; N];
        for (row, counts) in p.iter_mut().zip(&self.counts) {
            let total: u64 = counts.iter().sum();
            if total > 0 {
                for (cell, &c) in row.iter_mut().zip(counts) {
                    *cell = c as f64 / total as f64;
                }
            }
        }
        p
    }

    pub fn probability(&self, from: ReformulationState, to: ReformulationState) -> f64 {
        self.probabilities()[from.index()][to.index()]
    }
}

impl AddAssign for TransitionMatrix {
    fn add_assign(&mut self, other: Self) {
        for (row, other) in self.counts.iter_mut().zip(other.counts) {
            for (cell, c) in row.iter_mut().zip(other) {
                *cell += c;
            }
        }
    }
}

impl Add for TransitionMatrix {
    type Output = Self;

    fn add(mut self, other: Self) -> Self {
        self += other;
        self
    }
}

pub fn build_transition_matrix(traces: &[Trace]) -> TransitionMatrix {
    par::fold_merge(
        traces,
        TransitionMatrix::default,
        |mut m, t| {
            m.add_trace(t);
            m
        },
        Add::add,
    )
}

pub fn build_transition_matrix_sequential(traces: &[Trace]) -> TransitionMatrix {
    let mut m = TransitionMatrix::default();
    for t in traces {
        m.add_trace(t);
    }
    m
}

/// How often each state was assigned at one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateDistribution {
    pub counts: [u64; N],
}

impl StateDistribution {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn probability(&self, state: ReformulationState) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.counts[state.index()] as f64 / n as f64,
        }
    }
}

/// Entry `i - 1` is the distribution of states assigned to the i-th synthetic
/// query, over traces with at least `i` frames. Later iterations are ignored.
pub fn per_iteration_distributions(traces: &[Trace], max_iteration: usize) -> Vec<StateDistribution> {
    let fold = |mut acc: Vec<StateDistribution>, t: &Trace| {
        for (slot, state) in acc.iter_mut().zip(query_states(t)) {
            slot.counts[state.index()] += 1;
        }
        acc
    };
    let merge = |mut a: Vec<StateDistribution>, b: Vec<StateDistribution>| {
        for (x, y) in a.iter_mut().zip(b) {
            for (c, d) in x.counts.iter_mut().zip(y.counts) {
                *c += d;
            }
        }
        a
    };
    par::fold_merge(
        traces,
        || vec![StateDistribution::default(); max_iteration],
        fold,
        merge,
    )
}
