//! Deterministic scripted generator.
//!
//! A script is an ordered list of canned responses. Each request consumes the
//! first unconsumed entry whose trigger matches the request context; when no
//! entry matches, the reply is empty with `finish_reason = eos`.
//!
//! ```json
//! {"entries": [
//!   {"response": "<search>q1</search>"},
//!   {"when": {"context_contains": "<information>"}, "response": "<answer>A</answer>"}
//! ]}
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Completion, FinishReason, GenerateRequest, Generator, GeneratorFactory, ProtocolError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    #[default]
    AlwaysNext,
    ContextContains(String),
}

impl Trigger {
    fn matches(&self, context: &str) -> bool {
        match self {
            Trigger::AlwaysNext => true,
            Trigger::ContextContains(needle) => context.contains(needle.as_str()),
        }
    }
}

fn eos() -> FinishReason {
    FinishReason::Eos
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub when: Trigger,
    pub response: String,
    /// Reported when no stop sequence occurs in the response.
    #[serde(default = "eos")]
    pub finish_reason: FinishReason,
}

impl ScriptEntry {
    pub fn next(response: impl Into<String>) -> Self {
        Self {
            when: Trigger::AlwaysNext,
            response: response.into(),
            finish_reason: FinishReason::Eos,
        }
    }

    pub fn when_context_contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            when: Trigger::ContextContains(needle.into()),
            response: response.into(),
            finish_reason: FinishReason::Eos,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    /// Responses consumed in order.
    pub fn sequence<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(responses.into_iter().map(ScriptEntry::next).collect())
    }
}

/// Truncates `text` right after the earliest-ending stop sequence. Returns the
/// kept text and the stop that fired.
pub fn apply_stop<'a>(text: &'a str, stops: &[String]) -> (&'a str, Option<String>) {
    let hit = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()).map(|at| (at + s.len(), s)))
        .min_by_key(|(end, s)| (*end, std::cmp::Reverse(s.len())));
    match hit {
        Some((end, stop)) => (&text[..end], Some(stop.clone())),
        None => (text, None),
    }
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    script: MockScript,
    consumed: Vec<bool>,
    chunk_chars: usize,
}

impl MockGenerator {
    pub fn new(script: MockScript) -> Self {
        let consumed = vec![false; script.entries.len()];
        Self {
            script,
            consumed,
            chunk_chars: 7,
        }
    }

    /// Characters per streamed chunk (at least 1).
    pub fn with_chunk_chars(mut self, n: usize) -> Self {
        self.chunk_chars = n.max(1);
        self
    }

    pub fn remaining(&self) -> usize {
        self.consumed.iter().filter(|c| !**c).count()
    }

    fn take(&mut self, context: &str) -> Option<&ScriptEntry> {
        let idx = self
            .script
            .entries
            .iter()
            .enumerate()
            .position(|(i, e)| !self.consumed[i] && e.when.matches(context))?;
        self.consumed[idx] = true;
        Some(&self.script.entries[idx])
    }
}

impl Generator for MockGenerator {
    fn generate(
        &mut self,
        request: &GenerateRequest,
        _deadline: Option<Instant>,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Completion, ProtocolError> {
        let chunk_chars = self.chunk_chars;
        let Some(entry) = self.take(&request.context) else {
            return Ok(Completion {
                finish_reason: FinishReason::Eos,
                matched_stop: None,
            });
        };
        let (text, matched_stop) = apply_stop(&entry.response, &request.stop_sequences);
        let finish_reason = match (&matched_stop, entry.finish_reason) {
            (Some(_), _) => FinishReason::Stop,
            (None, FinishReason::Stop) => FinishReason::Eos,
            (None, other) => other,
        };
        let mut start = 0;
        let mut count = 0;
        for (i, _) in text.char_indices() {
            if count == chunk_chars {
                on_chunk(&text[start..i]);
                start = i;
                count = 0;
            }
            count += 1;
        }
        if start < text.len() {
            on_chunk(&text[start..]);
        }
        Ok(Completion {
            finish_reason,
            matched_stop,
        })
    }
}

/// Scripts keyed by qid, with `"*"` as the fallback for unlisted queries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptBook {
    pub scripts: BTreeMap<String, MockScript>,
}

impl ScriptBook {
    pub const FALLBACK: &'static str = "*";

    pub fn script_for(&self, qid: &str) -> MockScript {
        self.scripts
            .get(qid)
            .or_else(|| self.scripts.get(Self::FALLBACK))
            .cloned()
            .unwrap_or_default()
    }
}

impl GeneratorFactory for ScriptBook {
    fn connect(&self, qid: &str) -> Result<Box<dyn Generator>, ProtocolError> {
        Ok(Box::new(MockGenerator::new(self.script_for(qid))))
    }
}
