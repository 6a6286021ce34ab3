//! Incremental scanner for the control tags an agent emits while decoding.
//!
//! The grammar is flat: a recognized open tag, arbitrary content (which may
//! contain `<`), and the matching close tag. Text outside recognized tags is
//! skipped. Nested or interleaved recognized tags are a parse error, as is a
//! close tag with nothing open. Partial tags split across chunks are buffered
//! until they can be decided, so the event sequence never depends on how the
//! stream was chunked.

use std::fmt;
use std::ops::Range;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagKind {
    Think,
    Search,
    Answer,
    Refine,
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagKind::Think => "think",
            TagKind::Search => "search",
            TagKind::Answer => "answer",
            TagKind::Refine => "refine",
        })
    }
}

/// Tag names an agent uses. `information` is written by the orchestrator and
/// is never parsed out of generator output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    pub think: String,
    pub search: String,
    pub information: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<String>,
}

impl Default for TagSet {
    fn default() -> Self {
        Self {
            think: "think".into(),
            search: "search".into(),
            information: "information".into(),
            answer: "answer".into(),
            refine: None,
        }
    }
}

impl TagSet {
    pub fn with_refine(mut self, name: impl Into<String>) -> Self {
        self.refine = Some(name.into());
        self
    }

    pub fn name(&self, kind: TagKind) -> Option<&str> {
        match kind {
            TagKind::Think => Some(&self.think),
            TagKind::Search => Some(&self.search),
            TagKind::Answer => Some(&self.answer),
            TagKind::Refine => self.refine.as_deref(),
        }
    }

    pub fn open(name: &str) -> String {
        format!("<{name}>")
    }

    pub fn close(name: &str) -> String {
        format!("</{name}>")
    }

    /// Stop sequences that end a decoding loop.
    pub fn stop_sequences(&self) -> Vec<String> {
        vec![Self::close(&self.search), Self::close(&self.answer)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagEvent {
    pub kind: TagKind,
    /// Content between the tags with surrounding whitespace trimmed.
    pub content: String,
    /// Byte range of the whole tagged element in the fed stream.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    SearchIssued,
    Answered,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("`{found}` closed at byte {offset} while `{open}` was open")]
    MismatchedClose {
        open: TagKind,
        found: TagKind,
        offset: usize,
    },
    #[error("`{found}` opened at byte {offset} while `{open}` was still open")]
    NestedOpen {
        open: TagKind,
        found: TagKind,
        offset: usize,
    },
    #[error("`{kind}` closed at byte {offset} without being opened")]
    UnexpectedClose { kind: TagKind, offset: usize },
    #[error("stream ended inside `{kind}` opened at byte {offset}")]
    UnclosedTag { kind: TagKind, offset: usize },
}

/// What one call to [`TagParser::feed`] produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Feed {
    pub events: Vec<TagEvent>,
    pub stop: Option<Stop>,
    /// Set when the stream became malformed; `events` still holds everything
    /// emitted before that point.
    pub error: Option<ParseError>,
}

impl Feed {
    pub fn into_result(self) -> Result<(Vec<TagEvent>, Option<Stop>), ParseError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok((self.events, self.stop)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Outside,
    Inside { kind: TagKind, content_start: usize },
}

enum Probe {
    Open(TagKind),
    Close(TagKind),
    Partial,
    Text,
}

enum Step {
    NeedMore,
    Event(TagEvent),
}

#[derive(Debug, Clone)]
struct Pattern {
    kind: TagKind,
    open: String,
    close: String,
}

#[derive(Debug, Clone)]
pub struct TagParser {
    patterns: Vec<Pattern>,
    buffer: String,
    /// Stream offset of `buffer[0]`.
    base: usize,
    /// Buffer index where scanning resumes.
    scan: usize,
    mode: Mode,
    poisoned: Option<ParseError>,
}

impl TagParser {
    pub fn new(tags: &TagSet) -> Self {
        let patterns = [TagKind::Think, TagKind::Search, TagKind::Answer, TagKind::Refine]
            .into_iter()
            .filter_map(|kind| {
                tags.name(kind).map(|name| Pattern {
                    kind,
                    open: TagSet::open(name),
                    close: TagSet::close(name),
                })
            })
            .collect();
        Self {
            patterns,
            buffer: String::new(),
            base: 0,
            scan: 0,
            mode: Mode::Outside,
            poisoned: None,
        }
    }

    /// Total bytes fed so far.
    pub fn stream_len(&self) -> usize {
        self.base + self.buffer.len()
    }

    pub fn is_inside(&self) -> bool {
        matches!(self.mode, Mode::Inside { .. })
    }

    /// Appends `chunk` and scans as far as possible. Scanning pauses right
    /// after a search or answer element; feed an empty chunk to resume.
    pub fn feed(&mut self, chunk: &str) -> Feed {
        let mut out = Feed::default();
        if let Some(err) = &self.poisoned {
            out.error = Some(err.clone());
            return out;
        }
        self.buffer.push_str(chunk);
        loop {
            match self.step() {
                Ok(Step::NeedMore) => return out,
                Ok(Step::Event(event)) => {
                    let stop = match event.kind {
                        TagKind::Search => Some(Stop::SearchIssued),
                        TagKind::Answer => Some(Stop::Answered),
                        TagKind::Think | TagKind::Refine => None,
                    };
                    out.events.push(event);
                    if stop.is_some() {
                        out.stop = stop;
                        return out;
                    }
                }
                Err(err) => {
                    self.poisoned = Some(err.clone());
                    out.error = Some(err);
                    return out;
                }
            }
        }
    }

    /// Declares end of stream.
    pub fn finish(&self) -> Result<(), ParseError> {
        if let Some(err) = &self.poisoned {
            return Err(err.clone());
        }
        match self.mode {
            Mode::Outside => Ok(()),
            Mode::Inside { kind, content_start } => {
                let open_len = self.pattern(kind).open.len();
                Err(ParseError::UnclosedTag {
                    kind,
                    offset: self.base + content_start - open_len,
                })
            }
        }
    }

    /// Drops buffered text that has not been scanned yet, e.g. generator
    /// overrun after a stop. Returns the number of bytes dropped.
    pub fn discard_pending(&mut self) -> usize {
        let dropped = self.buffer.len();
        self.base += dropped;
        self.buffer.clear();
        self.scan = 0;
        self.mode = Mode::Outside;
        dropped
    }

    fn pattern(&self, kind: TagKind) -> &Pattern {
        self.patterns
            .iter()
            .find(|p| p.kind == kind)
            .expect("kind comes from a registered pattern")
    }

    fn probe(&self, at: usize) -> Probe {
        let rest = &self.buffer[at..];
        for p in &self.patterns {
            if rest.starts_with(&p.open) {
                return Probe::Open(p.kind);
            }
            if rest.starts_with(&p.close) {
                return Probe::Close(p.kind);
            }
        }
        let partial = self
            .patterns
            .iter()
            .any(|p| p.open.starts_with(rest) || p.close.starts_with(rest));
        if partial {
            Probe::Partial
        } else {
            Probe::Text
        }
    }

    fn advance(&mut self, by: usize) {
        self.buffer.drain(..by);
        self.base += by;
        self.scan = 0;
    }

    fn step(&mut self) -> Result<Step, ParseError> {
        loop {
            let Some(rel) = self.buffer[self.scan..].find('<') else {
                match self.mode {
                    Mode::Outside => {
                        let all = self.buffer.len();
                        self.advance(all);
                    }
                    Mode::Inside { .. } => self.scan = self.buffer.len(),
                }
                return Ok(Step::NeedMore);
            };
            let at = self.scan + rel;
            match self.mode {
                Mode::Outside => {
                    self.advance(at);
                    match self.probe(0) {
                        Probe::Open(kind) => {
                            let content_start = self.pattern(kind).open.len();
                            self.mode = Mode::Inside {
                                kind,
                                content_start,
                            };
                            self.scan = content_start;
                        }
                        Probe::Close(kind) => {
                            return Err(ParseError::UnexpectedClose {
                                kind,
                                offset: self.base,
                            })
                        }
                        Probe::Partial => return Ok(Step::NeedMore),
                        Probe::Text => self.scan = 1,
                    }
                }
                Mode::Inside {
                    kind: open,
                    content_start,
                } => match self.probe(at) {
                    Probe::Close(found) if found == open => {
                        let end = at + self.pattern(open).close.len();
                        let event = TagEvent {
                            kind: open,
                            content: self.buffer[content_start..at].trim().to_string(),
                            span: self.base..self.base + end,
                        };
                        self.mode = Mode::Outside;
                        self.advance(end);
                        return Ok(Step::Event(event));
                    }
                    Probe::Close(found) => {
                        return Err(ParseError::MismatchedClose {
                            open,
                            found,
                            offset: self.base + at,
                        })
                    }
                    Probe::Open(found) => {
                        return Err(ParseError::NestedOpen {
                            open,
                            found,
                            offset: self.base + at,
                        })
                    }
                    Probe::Partial => {
                        self.scan = at;
                        return Ok(Step::NeedMore);
                    }
                    Probe::Text => self.scan = at + 1,
                },
            }
        }
    }
}

/// Content of the first well-formed `<tag>...</tag>` pair in `text`, trimmed.
pub fn extract_single(text: &str, tag: &str) -> Option<String> {
    let tag = regex::escape(tag);
    let re = Regex::new(&format!("(?s)<{tag}>(.*?)</{tag}>")).expect("escaped pattern compiles");
    re.captures(text).map(|c| c[1].trim().to_string())
}
