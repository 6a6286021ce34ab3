//! First-stage BM25 retrieval, a re-ranking hook, and rendering of retrieved
//! documents into the information block handed to the generator.

mod corpus;
mod index;

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

pub use corpus::{Corpus, CorpusError, Document};
pub use index::{tokenize, Bm25Params, Index, IndexError};

use crate::par;
use crate::trace::DocId;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverConfig {
    /// Candidates kept from BM25 before re-ranking.
    pub k_first_stage: usize,
    /// Documents passed to the generator.
    pub k_final: usize,
    /// Whitespace tokens kept per document body.
    pub truncate_tokens: usize,
    pub include_titles: bool,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            k_first_stage: 1000,
            k_final: 3,
            truncate_tokens: 512,
            include_titles: true,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid retriever configuration: {0}")]
pub struct ConfigError(pub String);

impl RetrieverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_final < 1 || self.k_final > self.k_first_stage {
            return Err(ConfigError(format!(
                "need 1 <= k_final ({}) <= k_first_stage ({})",
                self.k_final, self.k_first_stage
            )));
        }
        if self.truncate_tokens < 1 {
            return Err(ConfigError("truncate_tokens must be at least 1".into()));
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) || !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(ConfigError(format!(
                "bm25 parameters out of range (k1={}, b={})",
                self.bm25_k1, self.bm25_b
            )));
        }
        Ok(())
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub docid: DocId,
    pub score: f64,
}

/// Ranked documents, best first. Ties are broken by ascending docid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalResult {
    pub docs: Vec<ScoredDoc>,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.docs.iter().map(|d| d.docid)
    }
}

fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score.total_cmp(&a.score).then(a.docid.cmp(&b.docid))
}

/// BM25 candidates for `query`, truncated to `k_first_stage`.
pub fn first_stage(index: &Index, query: &str, config: &RetrieverConfig) -> RetrievalResult {
    let terms = tokenize(query);
    let mut docs: Vec<ScoredDoc> = index
        .score_candidates(&terms, config.bm25())
        .into_iter()
        .map(|(docid, score)| ScoredDoc { docid, score })
        .collect();
    docs.sort_by(rank_order);
    docs.truncate(config.k_first_stage);
    RetrievalResult { docs }
}

/// BM25-only pipeline: first stage followed by the identity re-ranker.
pub fn search(index: &Index, query: &str, config: &RetrieverConfig) -> RetrievalResult {
    let mut result = first_stage(index, query, config);
    result.docs.truncate(config.k_final);
    result
}

/// Runs [`search`] for many queries at once.
pub fn search_many<S: AsRef<str> + Sync>(
    index: &Index,
    queries: &[S],
    config: &RetrieverConfig,
) -> Vec<RetrievalResult> {
    par::map(queries, |q| search(index, q.as_ref(), config))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("re-ranker failed: {0}")]
pub struct RerankError(pub String);

/// Second-stage scorer applied to first-stage candidates.
pub trait Reranker: Send + Sync {
    fn score(&self, query: &str, doc: &ScoredDoc) -> Result<f64, RerankError>;

    fn name(&self) -> &str;
}

/// Keeps the first-stage score.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn score(&self, _query: &str, doc: &ScoredDoc) -> Result<f64, RerankError> {
        Ok(doc.score)
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Re-sorts `result` by the re-ranker's scores and keeps the top `k_final`.
pub fn rerank(
    result: &RetrievalResult,
    query: &str,
    reranker: &dyn Reranker,
    k_final: usize,
) -> Result<RetrievalResult, RerankError> {
    let mut docs = Vec::with_capacity(result.len());
    for doc in &result.docs {
        let score = reranker.score(query, doc)?;
        if score.is_nan() {
            return Err(RerankError(format!("NaN score for docid {}", doc.docid)));
        }
        docs.push(ScoredDoc {
            docid: doc.docid,
            score,
        });
    }
    docs.sort_by(rank_order);
    docs.truncate(k_final);
    Ok(RetrievalResult { docs })
}

fn truncate_tokens(body: &str, limit: usize) -> String {
    body.split_whitespace().take(limit).collect::<Vec<_>>().join(" ")
}

/// Renders retrieved documents as
/// `<information>Doc 1(Title: t) body\nDoc 2(Title: t) body</information>`.
pub fn format_information_block(
    result: &RetrievalResult,
    corpus: &Corpus,
    config: &RetrieverConfig,
    tag: &str,
) -> Result<String, CorpusError> {
    let mut out = format!("<{tag}>");
    for (rank, scored) in (1..).zip(&result.docs) {
        let doc = corpus
            .get(scored.docid)
            .ok_or(CorpusError::Unresolvable(scored.docid))?;
        if rank > 1 {
            out.push('\n');
        }
        let body = truncate_tokens(&doc.body, config.truncate_tokens);
        match doc.title.as_deref().filter(|_| config.include_titles) {
            Some(title) => write!(out, "Doc {rank}(Title: {title}) {body}"),
            None => write!(out, "Doc {rank} {body}"),
        }
        .expect("writing to a String");
    }
    write!(out, "</{tag}>").expect("writing to a String");
    Ok(out)
}

/// One line of a standard run file: `qid Q0 docid rank score tag`.
pub fn run_line(qid: &str, rank: usize, doc: &ScoredDoc, tag: &str) -> String {
    format!("{qid} Q0 {} {rank} {:.6} {tag}", doc.docid, doc.score)
}

/// What the orchestrator receives for one synthetic query.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub result: RetrievalResult,
    /// Set when the re-ranker failed and first-stage order was used instead.
    pub rerank_fallback: Option<RerankError>,
}

/// A retriever the orchestrator can intercept.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str) -> Retrieval;

    /// Renders a result into the block appended to the generator context.
    fn render(&self, result: &RetrievalResult, information_tag: &str) -> Result<String, CorpusError>;

    /// Short configuration string recorded with every trace.
    fn describe(&self) -> String;
}

pub struct Bm25Retriever {
    index: Index,
    corpus: Corpus,
    config: RetrieverConfig,
    reranker: Box<dyn Reranker>,
}

impl Bm25Retriever {
    pub fn new(corpus: Corpus, config: RetrieverConfig) -> Result<Self, RetrieverError> {
        config.validate()?;
        let index = Index::build_with(corpus.docs(), config.include_titles)?;
        Ok(Self {
            index,
            corpus,
            config,
            reranker: Box::new(IdentityReranker),
        })
    }

    pub fn with_reranker(mut self, reranker: Box<dyn Reranker>) -> Self {
        self.reranker = reranker;
        self
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn config(&self) -> &RetrieverConfig {
        &self.config
    }
}

impl Retriever for Bm25Retriever {
    fn retrieve(&self, query: &str) -> Retrieval {
        let candidates = first_stage(&self.index, query, &self.config);
        match rerank(&candidates, query, self.reranker.as_ref(), self.config.k_final) {
            Ok(result) => Retrieval {
                result,
                rerank_fallback: None,
            },
            Err(err) => {
                let mut result = candidates;
                result.docs.truncate(self.config.k_final);
                Retrieval {
                    result,
                    rerank_fallback: Some(err),
                }
            }
        }
    }

    fn render(&self, result: &RetrievalResult, information_tag: &str) -> Result<String, CorpusError> {
        format_information_block(result, &self.corpus, &self.config, information_tag)
    }

    fn describe(&self) -> String {
        let c = &self.config;
        format!(
            "bm25(k1={},b={}) top{} >> {} (k={}, truncate={}, titles={})",
            c.bm25_k1,
            c.bm25_b,
            c.k_first_stage,
            self.reranker.name(),
            c.k_final,
            c.truncate_tokens,
            c.include_titles
        )
    }
}

#[derive(Debug, Error)]
pub enum RetrieverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
