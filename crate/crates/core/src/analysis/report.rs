//! Byte-stable TSV renderings of analysis results. Reals are printed with six
//! decimals.

use std::fmt::Write;

use super::{ReformulationState, StateDistribution, TextStats, TraceStats, TransitionMatrix};
use crate::trace::TraceStatus;

const N: usize = ReformulationState::ALL.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixValues {
    Counts,
    #[default]
    Probabilities,
}

fn header(out: &mut String, first: &str) {
    out.push_str(first);
    for s in ReformulationState::ALL {
        let _ = write!(out, "\t{s}");
    }
    out.push('\n');
}

/// A 7x7 matrix with a header row and a from-state column.
pub fn matrix_tsv(m: &TransitionMatrix, values: MatrixValues) -> String {
    let probs = m.probabilities();
    let mut out = String::new();
    header(&mut out, "from\\to");
    for from in ReformulationState::ALL {
        out.push_str(from.as_str());
        for to in ReformulationState::ALL {
            let (i, j) = (from.index(), to.index());
            let _ = match values {
                MatrixValues::Counts => write!(out, "\t{}", m.counts[i][j]),
                MatrixValues::Probabilities => write!(out, "\t{:.6}", probs[i][j]),
            };
        }
        out.push('\n');
    }
    out
}

/// Reads a matrix in the layout written by [`matrix_tsv`]. Rows and columns
/// may come in any order but all seven states must be present.
pub fn parse_matrix_tsv(text: &str) -> Result<[[f64; N]; N], String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or("empty matrix file")?;
    let cols = head
        .split('\t')
        .skip(1)
        .map(|c| ReformulationState::parse(c.trim()).ok_or(format!("unknown state `{c}` in header")))
        .collect::<Result<Vec<_>, _>>()?;
    if cols.len() != N {
        return Err(format!("expected {N} state columns, found {}", cols.len()));
    }
    let mut m = [[0.0; N]; N];
    let mut seen = [false; N];
    for line in lines {
        let mut cells = line.split('\t');
        let from = cells.next().unwrap_or_default().trim();
        let from = ReformulationState::parse(from).ok_or(format!("unknown state `{from}`"))?;
        let values: Vec<&str> = cells.collect();
        if values.len() != N {
            return Err(format!("row {from} has {} values, expected {N}", values.len()));
        }
        for (to, v) in cols.iter().zip(values) {
            m[from.index()][to.index()] = v
                .trim()
                .parse()
                .map_err(|_| format!("row {from}: `{v}` is not a number"))?;
        }
        seen[from.index()] = true;
    }
    if let Some(missing) = ReformulationState::ALL.iter().find(|s| !seen[s.index()]) {
        return Err(format!("row {missing} is missing"));
    }
    Ok(m)
}

/// Agent probabilities next to an external reference matrix, one cell per row.
pub fn matrix_comparison_tsv(m: &TransitionMatrix, reference: &[[f64; N]; N]) -> String {
    let probs = m.probabilities();
    let mut out = String::from("from\tto\tagent\treference\n");
    for from in ReformulationState::ALL {
        for to in ReformulationState::ALL {
            let (i, j) = (from.index(), to.index());
            let _ = writeln!(out, "{from}\t{to}\t{:.6}\t{:.6}", probs[i][j], reference[i][j]);
        }
    }
    out
}

/// Flat `key<TAB>value` statistics.
pub fn stats_tsv(s: &TraceStats) -> String {
    let mut out = String::from("key\tvalue\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}\t{v}");
    };
    kv("traces", s.traces.to_string());
    kv("answers", s.answers.to_string());
    kv("search_calls", s.search_calls.to_string());
    kv("trace_length_mean", format!("{:.6}", s.trace_length_mean));
    kv("trace_length_std", format!("{:.6}", s.trace_length_std));
    kv("max_trace_length", s.trace_length_max.to_string());
    kv("query_length_mean", format!("{:.6}", s.query_length_mean));
    kv("query_length_std", format!("{:.6}", s.query_length_std));
    kv("std", s.std_kind.as_str().to_string());
    for status in TraceStatus::ALL {
        let n = s.status_counts.get(&status).copied().unwrap_or(0);
        kv(&format!("status.{status}"), n.to_string());
    }
    out
}

pub fn text_tsv(t: &TextStats) -> String {
    let mut out = String::from("key\tvalue\n");
    let rows = [
        ("organic.queries", t.organic_queries.to_string()),
        ("organic.hapax_ratio", format!("{:.6}", t.organic_hapax_ratio)),
        ("organic.wh_query_rate", format!("{:.6}", t.organic_wh_query_rate)),
        ("organic.wh_token_rate", format!("{:.6}", t.organic_wh_token_rate)),
        ("synthetic.queries", t.synthetic_queries.to_string()),
        ("synthetic.hapax_ratio", format!("{:.6}", t.hapax_ratio)),
        ("synthetic.wh_query_rate", format!("{:.6}", t.wh_query_rate)),
        ("synthetic.wh_token_rate", format!("{:.6}", t.wh_token_rate)),
        ("synthetic.exact_repeat_rate", format!("{:.6}", t.exact_repeat_rate)),
        (
            "synthetic.mean_within_trace_jaccard",
            format!("{:.6}", t.mean_within_trace_jaccard),
        ),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

/// One row per iteration: how many traces reached it and the share of each
/// query state.
pub fn iterations_tsv(dists: &[StateDistribution]) -> String {
    let mut out = String::from("iteration\ttraces");
    for s in ReformulationState::QUERY_STATES {
        let _ = write!(out, "\t{s}");
    }
    out.push('\n');
    for (i, d) in dists.iter().enumerate() {
        let _ = write!(out, "{}\t{}", i + 1, d.total());
        for s in ReformulationState::QUERY_STATES {
            let _ = write!(out, "\t{:.6}", d.probability(s));
        }
        out.push('\n');
    }
    out
}
