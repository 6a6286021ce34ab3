//! Independent reference implementations and fixture helpers shared by the
//! integration tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use atk_core::analysis::ReformulationState;
use atk_core::retrieval::Document;
use atk_core::tags::{ParseError, Stop, TagEvent, TagParser};
use atk_core::trace::{Description, Frame, Trace, TraceBuilder, TraceMeta, TraceStatus};
use proptest::prelude::*;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden_dir() -> PathBuf {
    fixtures_dir().join("golden")
}

// ---------------------------------------------------------------- BM25

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Scores every document from scratch and fully sorts them: score
/// descending, docid ascending, zero scores dropped.
pub fn naive_bm25(docs: &[Document], query: &str) -> Vec<(u64, f64)> {
    let toks: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            let mut t = d.title.as_deref().map(naive_tokens).unwrap_or_default();
            t.extend(naive_tokens(&d.body));
            t
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut scored = Vec::new();
    for (doc, t) in docs.iter().zip(&toks) {
        let mut score = 0.0;
        for term in naive_tokens(query) {
            let tf = t.iter().filter(|x| **x == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = toks.iter().filter(|d| d.contains(&term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = K1 * (1.0 - B + B * t.len() as f64 / avgdl);
            score += idf * tf * (K1 + 1.0) / (tf + norm);
        }
        if score > 0.0 {
            scored.push((doc.docid, score));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Up to 20 documents over a vocabulary of at most 10 words, and a query of
/// one to four terms that may include an unseen word.
pub fn bm25_case() -> impl Strategy<Value = (Vec<Document>, String)> {
    (1usize..=10).prop_flat_map(|v| {
        let vocab: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
        let word = prop::sample::select(vocab.clone());
        let doc = (
            prop::option::of(prop::collection::vec(word.clone(), 1..3)),
            prop::collection::vec(word.clone(), 0..12),
        );
        let mut query_words = vocab;
        query_words.push("unseen".into());
        (
            prop::collection::vec(doc, 1..=20),
            prop::collection::vec(prop::sample::select(query_words), 1..=4),
        )
            .prop_map(|(docs, q)| {
                let docs = docs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (title, body))| {
                        Document::new(
                            (i as u64) * 7 + 3,
                            title.map(|t| t.join(" ")).as_deref(),
                            body.join(" "),
                        )
                    })
                    .collect();
                (docs, q.join(" "))
            })
    })
}

// ---------------------------------------------------------- classifier

pub const ALPHABET: [&str; 3] = ["a", "b", "c"];

/// Every token sequence over the alphabet of length at most `max_len`.
pub fn sequences(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut all = vec![vec![]];
    let mut frontier: Vec<Vec<&'static str>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in ALPHABET {
                let mut s = s.clone();
                s.push(t);
                next.push(s);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// Renders a token sequence with varying case and spacing so normalization
/// is exercised too.
pub fn render(tokens: &[&str], variant: usize) -> String {
    match variant % 3 {
        0 => tokens.join(" "),
        1 => format!("  {}\t", tokens.join("   ").to_uppercase()),
        _ => tokens
            .iter()
            .enumerate()
            .map(|(i, t)| if i % 2 == 0 { t.to_uppercase() } else { t.to_string() })
            .collect::<Vec<_>>()
            .join(" \n "),
    }
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(String::from).collect()
}

/// All ways to choose `k` positions out of `n`, in increasing order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// `small` is obtained from `big` by deleting at least one token.
fn brute_proper_subsequence(small: &[String], big: &[String]) -> bool {
    small.len() < big.len()
        && combinations(big.len(), small.len())
            .iter()
            .any(|idx| idx.iter().map(|&i| &big[i]).eq(small.iter()))
}

/// The state definitions checked one by one in precedence order.
pub fn oracle_state(query: &str, history: &[String]) -> ReformulationState {
    let q = lower_tokens(query);
    let last = lower_tokens(history.last().expect("non-empty history"));
    let earlier: Vec<Vec<String>> = history[..history.len() - 1]
        .iter()
        .map(|h| lower_tokens(h))
        .collect();
    if q == last {
        ReformulationState::Rep
    } else if earlier.contains(&q) {
        ReformulationState::Dup
    } else if brute_proper_subsequence(&last, &q) {
        ReformulationState::Add
    } else if brute_proper_subsequence(&q, &last) {
        ReformulationState::Rem
    } else {
        ReformulationState::Ch
    }
}

// -------------------------------------------------------------- parser

/// Generator outputs covering every element kind, partial tags, stray angle
/// brackets, multibyte text and each error class.
pub const PARSER_STREAMS: [&str; 20] = [
    "<think>plan</think><search>capital of france</search>",
    "<answer>Paris</answer>",
    "<think>a</think><think>b</think><answer>c</answer> overrun",
    "<search>q1</search><think>after stop</think><search>q2</search>",
    "<think>x < y and y > z</think><search>a<b</search>",
    "<think>no close",
    "<search>unfinished query",
    "<think>nested <search>bad</search></think>",
    "<think>mismatch</search>",
    "stray </think> close",
    "<refine>doc 1 is relevant</refine><think>ok</think><answer>yes</answer>",
    "<information>should not parse</information><answer>fine</answer>",
    "<thinking>not a tag</thinking><think>real</think><search>x</search>",
    "préambule <think>élan vital ✓ 日本語</think><search>naïve café</search>",
    "<think>\n\tmulti\nline\n</think><answer>\n spaced \n</answer>",
    "<<think>>double</think>><search>s</search>",
    "<sea<search>partial open</search>",
    "<think></think><search>  </search><answer></answer>",
    "plain text without any tags at all",
    "<think>one</think>text<search>two</search>more<think>three</think><answer>four</answer>",
];

pub type Driven = (Vec<TagEvent>, Vec<(usize, Stop)>, Option<ParseError>, Result<(), ParseError>);

/// Feeds chunks in order, resuming after every stop, then finishes.
pub fn drive<S: AsRef<str>>(parser: &mut TagParser, chunks: &[S]) -> Driven {
    let mut events = Vec::new();
    let mut stops = Vec::new();
    let mut error = None;
    'outer: for chunk in chunks {
        let mut feed = parser.feed(chunk.as_ref());
        loop {
            events.extend(feed.events);
            if let Some(e) = feed.error {
                error = Some(e);
                break 'outer;
            }
            match feed.stop {
                Some(s) => {
                    stops.push((events.len(), s));
                    feed = parser.feed("");
                }
                None => break,
            }
        }
    }
    let finished = parser.finish();
    (events, stops, error, finished)
}

/// Splits `text` at the given byte positions, snapped to char boundaries.
pub fn split_at_points(text: &str, points: &[usize]) -> Vec<String> {
    let mut cuts: BTreeSet<usize> = points
        .iter()
        .map(|&p| {
            let mut p = p.min(text.len());
            while !text.is_char_boundary(p) {
                p -= 1;
            }
            p
        })
        .collect();
    cuts.insert(0);
    cuts.insert(text.len());
    let cuts: Vec<usize> = cuts.into_iter().collect();
    cuts.windows(2).map(|w| text[w[0]..w[1]].to_string()).collect()
}

// --------------------------------------------------------------- traces

fn tricky_char() -> impl Strategy<Value = char> {
    prop_oneof![
        4 => proptest::char::range('a', 'z'),
        1 => Just('\t'),
        1 => Just('\n'),
        1 => Just('\r'),
        1 => Just('\\'),
        1 => Just(' '),
        1 => Just('t'),
        1 => Just('n'),
        2 => any::<char>(),
    ]
}

pub fn tricky_text(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(tricky_char(), 0..max).prop_map(|c| c.into_iter().collect())
}

fn nonempty_text(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(tricky_char(), 1..max).prop_map(|c| c.into_iter().collect())
}

fn description() -> impl Strategy<Value = Description> {
    (any::<bool>(), tricky_text(24)).prop_map(|(thought, text)| {
        if thought {
            Description::thought(text)
        } else {
            Description::refinement(text)
        }
    })
}

fn frame_parts() -> impl Strategy<Value = (String, BTreeSet<u64>, Vec<Description>)> {
    (
        nonempty_text(20),
        prop::collection::btree_set(any::<u64>(), 0..5),
        prop::collection::vec(description(), 0..3),
    )
}

/// Finalized traces with arbitrary text in every free-form field.
pub fn arbitrary_trace() -> impl Strategy<Value = Trace> {
    (
        "[a-zA-Z0-9_-]{1,10}",
        tricky_text(30),
        prop::collection::vec(frame_parts(), 0..5),
        prop::collection::vec(description(), 0..3),
        prop::sample::select(TraceStatus::ALL.to_vec()),
        tricky_text(30),
        prop::option::of(tricky_text(10)),
        prop::option::of(tricky_text(10)),
        prop::collection::vec(any::<u32>(), 0..3),
    )
        .prop_map(
            |(qid, q0, frames, closing, status, answer, agent, error, fallbacks)| {
                let mut b = TraceBuilder::new(qid, q0);
                for (i, (query, docids, descriptions)) in frames.into_iter().enumerate() {
                    b.append_frame(Frame::new(i as u32, query, docids, descriptions))
                        .unwrap();
                }
                for d in closing {
                    b.add_closing_description(d);
                }
                *b.meta_mut() = TraceMeta {
                    agent,
                    retriever: Some("bm25".into()),
                    rerank_fallbacks: fallbacks,
                    error,
                };
                let answer = (status == TraceStatus::Answered).then_some(answer);
                b.finalize(answer, status).unwrap()
            },
        )
}

// ------------------------------------------------------------- stores

/// Relative path to file contents for every file under `root`.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Differences between the TSV files of two stores; empty when identical.
pub fn diff_tsv_trees(expected: &Path, actual: &Path) -> Vec<String> {
    let keep = |m: BTreeMap<String, Vec<u8>>| -> BTreeMap<String, Vec<u8>> {
        m.into_iter().filter(|(k, _)| k.ends_with(".tsv")).collect()
    };
    let e = keep(read_tree(expected));
    let a = keep(read_tree(actual));
    let mut diffs = Vec::new();
    for (k, v) in &e {
        match a.get(k) {
            None => diffs.push(format!("missing {k}")),
            Some(w) if w != v => diffs.push(format!("differs {k}")),
            _ => {}
        }
    }
    for k in a.keys().filter(|k| !e.contains_key(*k)) {
        diffs.push(format!("unexpected {k}"));
    }
    diffs
}

/// `qid -> (status, length, description kinds)` from the golden expectations.
pub fn golden_expectations() -> BTreeMap<String, (String, usize, String)> {
    let text = fs::read_to_string(golden_dir().join("expected.tsv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), (f[1].to_string(), f[2].parse().unwrap(), f[3].to_string()))
        })
        .collect()
}

/// Hand-computed statistics of the golden run: 20 direct answers, ten runs of
/// length 1, six of length 2, four of length 3, an empty retrieval (1), a
/// malformed tail (1), a capped loop (5) and seven length-3 pattern runs.
pub mod golden_stats {
    pub const TRACES: u64 = 50;
    pub const ANSWERS: u64 = 48;
    pub const SEARCH_CALLS: u64 = 62;
    pub const MAX_LENGTH: u64 = 5;
    /// 62 / 50
    pub const MEAN_LENGTH: f64 = 1.24;
    /// sum of squared lengths is 160, so variance is 160/50 - 1.24^2
    pub fn std_length() -> f64 {
        1.6624f64.sqrt()
    }
}
