//! In-memory inverted index with Okapi BM25 scoring.
//!
//! ```text
//! score(q, d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·dl/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```

use std::collections::HashMap;

use thiserror::Error;

use super::corpus::Document;
use crate::trace::DocId;

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("docid {0} appears more than once")]
    DuplicateDocid(DocId),
    #[error("docid {0} is not indexed")]
    NotIndexed(DocId),
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Index {
    postings: HashMap<String, Vec<Posting>>,
    docids: Vec<DocId>,
    doc_len: Vec<u32>,
    by_id: HashMap<DocId, u32>,
    avgdl: f64,
}

impl Index {
    /// Indexes titles together with bodies.
    pub fn build(docs: &[Document]) -> Result<Self, IndexError> {
        Self::build_with(docs, true)
    }

    pub fn build_with(docs: &[Document], index_titles: bool) -> Result<Self, IndexError> {
        let mut index = Index::default();
        let mut total_len = 0u64;
        for doc in docs {
            let ord = index.docids.len() as u32;
            if index.by_id.insert(doc.docid, ord).is_some() {
                return Err(IndexError::DuplicateDocid(doc.docid));
            }
            let mut tokens = Vec::new();
            if index_titles {
                if let Some(title) = &doc.title {
                    tokens.extend(tokenize(title));
                }
            }
            tokens.extend(tokenize(&doc.body));

            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                index
                    .postings
                    .entry(term)
                    .or_default()
                    .push(Posting { doc: ord, tf: count });
            }
            index.docids.push(doc.docid);
            index.doc_len.push(tokens.len() as u32);
            total_len += tokens.len() as u64;
        }
        if !index.docids.is_empty() {
            index.avgdl = total_len as f64 / index.docids.len() as f64;
        }
        Ok(index)
    }

    /// Number of indexed documents.
    pub fn len(&self) -> usize {
        self.docids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self, docid: DocId) -> Option<u32> {
        self.by_id.get(&docid).map(|&i| self.doc_len[i as usize])
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc: u32, params: Bm25Params) -> f64 {
        let tf = tf as f64;
        let dl = self.doc_len[doc as usize] as f64;
        let norm = params.k1 * (1.0 - params.b + params.b * dl / self.avgdl);
        idf * tf * (params.k1 + 1.0) / (tf + norm)
    }

    fn tf(&self, term: &str, doc: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| {
                p.binary_search_by_key(&doc, |x| x.doc)
                    .ok()
                    .map(|i| p[i].tf)
            })
            .unwrap_or(0)
    }

    /// BM25 score of one document. Each listed term contributes, repeats
    /// included; terms the document lacks contribute nothing.
    pub fn bm25_score<S: AsRef<str>>(
        &self,
        terms: &[S],
        docid: DocId,
        params: Bm25Params,
    ) -> Result<f64, IndexError> {
        let &doc = self.by_id.get(&docid).ok_or(IndexError::NotIndexed(docid))?;
        let mut score = 0.0;
        for term in terms {
            let term = term.as_ref();
            let tf = self.tf(term, doc);
            if tf > 0 {
                score += self.term_weight(self.idf(term), tf, doc, params);
            }
        }
        Ok(score)
    }

    /// Scores every document sharing at least one term with the query.
    /// Returns `(docid, score)` for positive scores, unordered.
    pub fn score_candidates<S: AsRef<str>>(&self, terms: &[S], params: Bm25Params) -> Vec<(DocId, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in terms {
            let term = term.as_ref();
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in postings {
                *acc.entry(p.doc).or_insert(0.0) += self.term_weight(idf, p.tf, p.doc, params);
            }
        }
        acc.into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc, s)| (self.docids[doc as usize], s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<Document> {
        vec![
            Document::new(1, None, "a b"),
            Document::new(2, None, "a a c"),
            Document::new(3, None, "b c"),
        ]
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Hello, World!  foo-bar_baz 42"), vec!["hello", "world", "foo", "bar", "baz", "42"]);
        assert!(tokenize(" ,; ").is_empty());
        assert_eq!(tokenize("Ünïcode ÉTÉ"), vec!["ünïcode", "été"]);
    }

    #[test]
    fn empty_index() {
        let idx = Index::build(&[]).unwrap();
        assert_eq!(idx.len(), 0);
        assert_eq!(idx.avgdl(), 0.0);
        assert!(idx.score_candidates(&["a"], Bm25Params::default()).is_empty());
    }

    #[test]
    fn toy_statistics() {
        // lengths 2, 3, 2
        let idx = Index::build(&toy()).unwrap();
        assert_eq!(idx.len(), 3);
        assert!((idx.avgdl() - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(idx.df("a"), 2);
        assert_eq!(idx.df("zzz"), 0);
    }

    #[test]
    fn duplicate_docid() {
        let docs = vec![Document::new(1, None, "x"), Document::new(1, None, "y")];
        assert_eq!(Index::build(&docs).unwrap_err(), IndexError::DuplicateDocid(1));
    }

    #[test]
    fn no_shared_term_scores_zero() {
        let idx = Index::build(&toy()).unwrap();
        assert_eq!(idx.bm25_score(&["c"], 1, Bm25Params::default()).unwrap(), 0.0);
        assert_eq!(
            idx.bm25_score(&["a"], 99, Bm25Params::default()),
            Err(IndexError::NotIndexed(99))
        );
    }

    #[test]
    fn toy_score_by_hand() {
        // d2 = "a a c": tf=2, dl=3, avgdl=7/3, df(a)=2, N=3
        let idx = Index::build(&toy()).unwrap();
        let idf = (1.0f64 + (3.0 - 2.0 + 0.5) / (2.0 + 0.5)).ln();
        let norm = 1.2 * (1.0 - 0.75 + 0.75 * 3.0 / (7.0 / 3.0));
        let expected = idf * 2.0 * 2.2 / (2.0 + norm);
        let got = idx.bm25_score(&["a"], 2, Bm25Params::default()).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn single_document_closed_form() {
        // dl == avgdl, so the length normalization collapses to k1
        let idx = Index::build(&[Document::new(5, None, "x y y")]).unwrap();
        let idf = (1.0f64 + 0.5 / 1.5).ln();
        let per = |tf: f64| idf * 2.2 * tf / (tf + 1.2);
        let expected = per(1.0) + per(2.0) + per(2.0);
        let got = idx.bm25_score(&tokenize("x y y"), 5, Bm25Params::default()).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn titles_are_optional_in_the_index() {
        let docs = vec![Document::new(1, Some("Paris"), "capital city")];
        assert_eq!(Index::build(&docs).unwrap().df("paris"), 1);
        assert_eq!(Index::build_with(&docs, false).unwrap().df("paris"), 0);
    }

    #[test]
    fn idf_is_never_negative() {
        let docs: Vec<_> = (0..5).map(|i| Document::new(i, None, "common")).collect();
        let idx = Index::build(&docs).unwrap();
        assert!(idx.idf("common") > 0.0);
    }
}
