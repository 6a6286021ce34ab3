//! Drives one agentic run: prompt construction, the decode/parse/retrieve
//! loop, run-time error handling, and trace finalization.
//!
//! Every generation call is issued with the close-search and close-answer
//! stop sequences. Generated text is parsed while it streams in. A search
//! element yields exactly one frame: its docids are logged straight from the
//! retriever's result, then the rendered information block is appended to the
//! context and decoding resumes. The context sent to the generator is only
//! ever the prompt, the generated text, and inserted information blocks.

mod batch;
mod profile;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use batch::{load_queries, run_batch, BatchError, BatchSummary, Query};
pub use profile::{AgentProfile, ProfileError};

use crate::protocol::{Completion, FinishReason, GenerateRequest, Generator};
use crate::retrieval::Retriever;
use crate::tags::{ParseError, Stop, TagEvent, TagKind, TagParser};
use crate::trace::{Description, Frame, Trace, TraceBuilder, TraceStatus};

const PLACEHOLDER: &str = "{question}";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("the initial query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Substitutes `q0` for the single `{question}` placeholder, verbatim.
pub fn build_prompt(q0: &str, profile: &AgentProfile) -> Result<String, InputError> {
    if q0.is_empty() {
        return Err(InputError::EmptyQuery);
    }
    profile.validate()?;
    let (head, tail) = profile
        .prompt_template
        .split_once(PLACEHOLDER)
        .expect("validated template has a placeholder");
    Ok(format!("{head}{q0}{tail}"))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub wall_time: Duration,
    pub generator_calls: usize,
    pub search_calls: usize,
}

enum Halt {
    Stop { kind: Stop, end: usize },
    Parse(ParseError),
}

/// Ends a run early with an incomplete status and a reason.
struct Abort {
    status: TraceStatus,
    reason: String,
}

impl Abort {
    fn parse(reason: impl ToString) -> Self {
        Self {
            status: TraceStatus::ParseError,
            reason: reason.to_string(),
        }
    }

    fn generator(reason: impl ToString) -> Self {
        Self {
            status: TraceStatus::GeneratorError,
            reason: reason.to_string(),
        }
    }
}

struct Run<'a> {
    profile: &'a AgentProfile,
    retriever: &'a dyn Retriever,
    builder: TraceBuilder,
    parser: TagParser,
    context: String,
    /// Descriptions waiting for the frame of the current iteration.
    pending: Vec<Description>,
    stops: Vec<String>,
}

impl Run<'_> {
    fn record_descriptions(&mut self, events: &[TagEvent]) {
        for e in events {
            match e.kind {
                TagKind::Think => self.pending.push(Description::thought(&e.content)),
                TagKind::Refine => {
                    // refinements belong to the retrieval they follow
                    if let Err(d) = self
                        .builder
                        .attach_to_last(Description::refinement(&e.content))
                    {
                        self.pending.push(d);
                    }
                }
                TagKind::Search | TagKind::Answer => {}
            }
        }
    }

    fn verify_stop(&self, completion: &Completion, generated: &str) -> Result<(), Abort> {
        if completion.finish_reason != FinishReason::Stop {
            return Ok(());
        }
        let Some(matched) = completion.matched_stop.as_deref() else {
            return Err(Abort::generator("finish_reason stop without matched_stop"));
        };
        if !self.stops.iter().any(|s| s == matched) {
            return Err(Abort::generator(format!(
                "generator matched `{matched}`, which was not requested"
            )));
        }
        if !generated.ends_with(matched) || generated.matches(matched).count() != 1 {
            return Err(Abort::generator(format!(
                "generated text does not end with a single `{matched}`"
            )));
        }
        Ok(())
    }

    /// One decoding loop. `Ok(None)` means the loop issued a search and the
    /// run continues; `Ok(Some(answer))` ends the run.
    fn step(
        &mut self,
        generator: &mut dyn Generator,
        request_id: String,
        deadline: Instant,
    ) -> Result<Option<String>, Abort> {
        let request = GenerateRequest {
            request_id,
            context: self.context.clone(),
            stop_sequences: self.stops.clone(),
            max_tokens: self.profile.max_tokens_per_call,
        };
        let call_start = self.parser.stream_len();
        let mut generated = String::new();
        let mut events = Vec::new();
        let mut halt = None;
        let parser = &mut self.parser;
        let result = generator.generate(&request, Some(deadline), &mut |chunk| {
            generated.push_str(chunk);
            if halt.is_some() {
                return;
            }
            let feed = parser.feed(chunk);
            events.extend(feed.events);
            if let Some(err) = feed.error {
                halt = Some(Halt::Parse(err));
            } else if let Some(kind) = feed.stop {
                let end = events.last().map_or(0, |e| e.span.end);
                halt = Some(Halt::Stop { kind, end });
            }
        });
        self.record_descriptions(&events);

        let completion = result.map_err(Abort::generator)?;
        match halt {
            Some(Halt::Parse(err)) => Err(Abort::parse(err)),
            Some(Halt::Stop { kind, end }) => {
                self.verify_stop(&completion, &generated)?;
                let kept = &generated[..end - call_start];
                let element = events.last().expect("a stop follows an event");
                let content = element.content.clone();
                self.parser.discard_pending();
                match kind {
                    Stop::Answered => Ok(Some(content)),
                    Stop::SearchIssued => {
                        let kept = kept.to_string();
                        self.search(content, &kept)?;
                        Ok(None)
                    }
                }
            }
            None => match completion.finish_reason {
                FinishReason::Error => Err(Abort::generator("generator reported an error")),
                FinishReason::Stop => Err(Abort::generator(format!(
                    "generator stopped on {:?} but no element was closed",
                    completion.matched_stop
                ))),
                FinishReason::Eos | FinishReason::Length => match self.parser.finish() {
                    Err(err) => Err(Abort::parse(err)),
                    Ok(()) => Err(Abort::parse("generation ended without a search or an answer")),
                },
            },
        }
    }

    fn search(&mut self, query: String, generated: &str) -> Result<(), Abort> {
        if query.is_empty() {
            return Err(Abort::parse("empty search query"));
        }
        let iteration = self.builder.next_iteration();
        let retrieval = self.retriever.retrieve(&query);
        let frame = Frame::new(
            iteration,
            query,
            retrieval.result.docids(),
            std::mem::take(&mut self.pending),
        );
        self.builder
            .append_frame(frame)
            .expect("orchestrator appends frames in order");
        if let Some(err) = &retrieval.rerank_fallback {
            log::warn!("{err}; using first-stage order for iteration {iteration}");
            self.builder.meta_mut().rerank_fallbacks.push(iteration);
        }
        let block = self
            .retriever
            .render(&retrieval.result, &self.profile.tags.information)
            .map_err(|e| Abort::generator(format!("retriever: {e}")))?;
        self.context.push_str(generated);
        self.context.push_str(&block);
        Ok(())
    }

    fn finish(mut self, outcome: Result<String, Abort>) -> Trace {
        for d in std::mem::take(&mut self.pending) {
            self.builder.add_closing_description(d);
        }
        let (answer, status) = match outcome {
            Ok(answer) => (Some(answer), TraceStatus::Answered),
            Err(abort) => {
                self.builder.meta_mut().error = Some(abort.reason);
                (None, abort.status)
            }
        };
        self.builder
            .finalize(answer, status)
            .expect("answer is present exactly when answered")
    }
}

/// Runs one agentic run to completion. Only invalid inputs are errors; every
/// failure during the run is recorded in the trace status instead.
pub fn run_arun(
    qid: &str,
    q0: &str,
    generator: &mut dyn Generator,
    retriever: &dyn Retriever,
    profile: &AgentProfile,
) -> Result<RunOutcome, InputError> {
    let prompt = build_prompt(q0, profile)?;
    let started = Instant::now();
    let deadline = started + profile.timeout();

    let mut builder = TraceBuilder::new(qid, q0);
    builder.meta_mut().agent = Some(profile.name.clone());
    builder.meta_mut().retriever = Some(retriever.describe());
    let mut run = Run {
        profile,
        retriever,
        builder,
        parser: TagParser::new(&profile.tags),
        context: prompt,
        pending: Vec::new(),
        stops: profile.tags.stop_sequences(),
    };

    let mut generator_calls = 0;
    let outcome = loop {
        if run.builder.len() >= profile.max_iterations as usize {
            break Err(Abort {
                status: TraceStatus::IterationCap,
                reason: format!("reached {} iterations", profile.max_iterations),
            });
        }
        if Instant::now() >= deadline {
            break Err(Abort::generator("run timed out"));
        }
        let request_id = format!("{qid}-{generator_calls}");
        generator_calls += 1;
        match run.step(generator, request_id, deadline) {
            Ok(Some(answer)) => break Ok(answer),
            Ok(None) => continue,
            Err(abort) => break Err(abort),
        }
    };

    let trace = run.finish(outcome);
    Ok(RunOutcome {
        search_calls: trace.len(),
        trace,
        wall_time: started.elapsed(),
        generator_calls,
    })
}
