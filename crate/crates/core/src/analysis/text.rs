use std::collections::{BTreeSet, HashMap};

use super::tokens;
use crate::trace::Trace;

pub const WH_WORDS: [&str; 8] = ["what", "why", "how", "when", "where", "who", "which", "whose"];

fn is_wh(token: &str) -> bool {
    WH_WORDS.contains(&token)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of vocabulary types that occur exactly once in the pooled tokens.
pub fn hapax_ratio<S: AsRef<str>>(queries: &[S]) -> f64 {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for q in queries {
        for t in tokens(q.as_ref()) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let once = counts.values().filter(|c| **c == 1).count();
    ratio(once, counts.len())
}

/// Fraction of queries containing at least one WH-word token.
pub fn wh_word_rate<S: AsRef<str>>(queries: &[S]) -> f64 {
    let hits = queries
        .iter()
        .filter(|q| tokens(q.as_ref()).iter().any(|t| is_wh(t)))
        .count();
    ratio(hits, queries.len())
}

/// Fraction of all tokens that are WH-words.
pub fn wh_token_rate<S: AsRef<str>>(queries: &[S]) -> f64 {
    let (mut wh, mut total) = (0, 0);
    for q in queries {
        for t in tokens(q.as_ref()) {
            total += 1;
            wh += usize::from(is_wh(&t));
        }
    }
    ratio(wh, total)
}

/// Fraction of synthetic queries that repeat the initial query or any earlier
/// synthetic query of the same trace, after normalization.
pub fn exact_repeat_rate(traces: &[Trace]) -> f64 {
    let (mut repeats, mut total) = (0, 0);
    for t in traces {
        let mut seen = vec![tokens(&t.initial_query)];
        for q in t.synthetic_queries() {
            let q = tokens(q);
            total += 1;
            if seen.contains(&q) {
                repeats += 1;
            }
            seen.push(q);
        }
    }
    ratio(repeats, total)
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Mean token-set Jaccard over all query pairs within a trace, averaged over
/// traces with at least two synthetic queries.
pub fn within_trace_jaccard(traces: &[Trace]) -> f64 {
    let mut sum = 0.0;
    let mut qualifying = 0;
    for t in traces {
        let sets: Vec<BTreeSet<String>> = t
            .synthetic_queries()
            .map(|q| tokens(q).into_iter().collect())
            .collect();
        if sets.len() < 2 {
            continue;
        }
        let mut pair_sum = 0.0;
        let mut pairs = 0;
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                pair_sum += jaccard(a, b);
                pairs += 1;
            }
        }
        sum += pair_sum / pairs as f64;
        qualifying += 1;
    }
    if qualifying == 0 {
        0.0
    } else {
        sum / qualifying as f64
    }
}

/// Text metrics of a trace collection. Organic figures cover the initial
/// queries, synthetic figures the agent-issued ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TextStats {
    pub organic_queries: usize,
    pub organic_hapax_ratio: f64,
    pub organic_wh_query_rate: f64,
    pub organic_wh_token_rate: f64,
    pub synthetic_queries: usize,
    pub hapax_ratio: f64,
    pub wh_query_rate: f64,
    pub wh_token_rate: f64,
    pub exact_repeat_rate: f64,
    pub mean_within_trace_jaccard: f64,
}

pub fn text_stats(traces: &[Trace]) -> TextStats {
    let organic: Vec<&str> = traces
        .iter()
        .map(|t| t.initial_query.as_str())
        .filter(|q| !q.is_empty())
        .collect();
    let synthetic: Vec<&str> = traces.iter().flat_map(|t| t.synthetic_queries()).collect();
    TextStats {
        organic_queries: organic.len(),
        organic_hapax_ratio: hapax_ratio(&organic),
        organic_wh_query_rate: wh_word_rate(&organic),
        organic_wh_token_rate: wh_token_rate(&organic),
        synthetic_queries: synthetic.len(),
        hapax_ratio: hapax_ratio(&synthetic),
        wh_query_rate: wh_word_rate(&synthetic),
        wh_token_rate: wh_token_rate(&synthetic),
        exact_repeat_rate: exact_repeat_rate(traces),
        mean_within_trace_jaccard: within_trace_jaccard(traces),
    }
}
