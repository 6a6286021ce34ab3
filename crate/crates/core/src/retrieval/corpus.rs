use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::DocId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub docid: DocId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(rename = "text")]
    pub body: String,
}

impl Document {
    pub fn new(docid: DocId, title: Option<&str>, body: impl Into<String>) -> Self {
        Self {
            docid,
            title: title.map(str::to_string),
            body: body.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("docid {0} appears more than once")]
    DuplicateDocid(DocId),
    #[error("docid {0} is not in the corpus")]
    Unresolvable(DocId),
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Documents addressable by docid.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<DocId, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.docid, i).is_some() {
                return Err(CorpusError::DuplicateDocid(doc.docid));
            }
        }
        Ok(Self { docs, by_id })
    }

    /// Reads one JSON object per line: `{"docid": 1, "title": "...", "text": "..."}`.
    /// Blank lines are skipped.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(doc);
        }
        Self::new(docs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::from_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn get(&self, docid: DocId) -> Option<&Document> {
        self.by_id.get(&docid).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_jsonl() {
        let src = "{\"docid\": 1, \"title\": \"T\", \"text\": \"a b\"}\n\n{\"docid\": 2, \"text\": \"c\"}\n";
        let c = Corpus::from_jsonl(src.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get(1).unwrap().title.as_deref(), Some("T"));
        assert_eq!(c.get(2).unwrap().body, "c");
        assert!(c.get(3).is_none());
    }

    #[test]
    fn reports_bad_lines_and_duplicates() {
        let err = Corpus::from_jsonl("{\"docid\": 1, \"text\": \"a\"}\n{\"docid\": \"x\"}\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
        let err = Corpus::from_jsonl("{\"docid\": 1, \"text\": \"a\"}\n{\"docid\": 1, \"text\": \"b\"}\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDocid(1)));
    }
}
