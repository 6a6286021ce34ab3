//! Newline-delimited JSON protocol between the orchestrator and a text
//! generator.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"hello","version":1}
//! -> {"type":"generate","request_id":"q1-0","context":"...","stop_sequences":["</search>","</answer>"],"max_tokens":512}
//! <- {"type":"chunk","request_id":"q1-0","text":"<think>..."}
//! <- {"type":"done","request_id":"q1-0","finish_reason":"stop","matched_stop":"</search>"}
//! ```
//!
//! When `finish_reason` is `stop`, the matched stop sequence is included at
//! the end of the concatenated chunk text. Unknown fields are ignored.

mod mock;
mod transport;

use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{apply_stop, MockGenerator, MockScript, ScriptBook, ScriptEntry, Trigger};
pub use transport::{GeneratorEndpoint, StreamGenerator};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub request_id: String,
    pub context: String,
    pub stop_sequences: Vec<String>,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Eos,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Done {
    pub request_id: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_stop: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello { version: u32 },
    Generate(GenerateRequest),
    Chunk { request_id: String, text: String },
    Done(Done),
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("peer speaks protocol version {0}, expected {PROTOCOL_VERSION}")]
    VersionMismatch(u32),
    #[error("generator closed the connection")]
    Closed,
    #[error("generator timed out")]
    Timeout,
    #[error("generator backend failed: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Message {
    /// One JSON object followed by `\n`.
    pub fn encode(&self) -> String {
        let mut line = serde_json::to_string(self).expect("messages always serialize");
        line.push('\n');
        line
    }

    pub fn decode(line: &str) -> Result<Self, ProtocolError> {
        let msg: Message = serde_json::from_str(line.trim_end_matches(['\n', '\r']))
            .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        if let Message::Done(done) = &msg {
            if (done.finish_reason == FinishReason::Stop) != done.matched_stop.is_some() {
                return Err(ProtocolError::Malformed(
                    "matched_stop must be present exactly when finish_reason is stop".into(),
                ));
            }
        }
        Ok(msg)
    }
}

/// How one generation call ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub finish_reason: FinishReason,
    pub matched_stop: Option<String>,
}

/// A text generator that streams its output.
pub trait Generator: Send {
    /// Streams the continuation of `request.context` through `on_chunk`.
    /// Implementations should give up with [`ProtocolError::Timeout`] once
    /// `deadline` passes.
    fn generate(
        &mut self,
        request: &GenerateRequest,
        deadline: Option<Instant>,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Completion, ProtocolError>;
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(
        &mut self,
        request: &GenerateRequest,
        deadline: Option<Instant>,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Completion, ProtocolError> {
        (**self).generate(request, deadline, on_chunk)
    }
}

/// Hands out one generator connection per agentic run.
pub trait GeneratorFactory: Sync {
    fn connect(&self, qid: &str) -> Result<Box<dyn Generator>, ProtocolError>;
}

/// Serves `generator` over the JSON-lines protocol until the peer hangs up.
pub fn serve<G: Generator + ?Sized>(
    generator: &mut G,
    reader: impl BufRead,
    mut writer: impl Write,
) -> Result<(), ProtocolError> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match Message::decode(&line)? {
            Message::Hello { .. } => {
                writer.write_all(
                    Message::Hello {
                        version: PROTOCOL_VERSION,
                    }
                    .encode()
                    .as_bytes(),
                )?;
            }
            Message::Generate(request) => {
                let mut io_result = Ok(());
                let completion = generator.generate(&request, None, &mut |text| {
                    if io_result.is_ok() {
                        let chunk = Message::Chunk {
                            request_id: request.request_id.clone(),
                            text: text.to_string(),
                        };
                        io_result = writer.write_all(chunk.encode().as_bytes());
                    }
                });
                io_result?;
                let done = match completion {
                    Ok(c) => Done {
                        request_id: request.request_id.clone(),
                        finish_reason: c.finish_reason,
                        matched_stop: c.matched_stop,
                    },
                    Err(err) => {
                        log::warn!("generation failed: {err}");
                        Done {
                            request_id: request.request_id.clone(),
                            finish_reason: FinishReason::Error,
                            matched_stop: None,
                        }
                    }
                };
                writer.write_all(Message::Done(done).encode().as_bytes())?;
            }
            other => {
                return Err(ProtocolError::Unexpected(format!(
                    "server received {other:?}"
                )))
            }
        }
        writer.flush()?;
    }
    Ok(())
}
