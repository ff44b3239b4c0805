//! Deterministic in-process backends for tests and offline runs.

use std::collections::{HashSet, VecDeque};
use std::sync::Mutex;

use super::{CompletionBackend, CompletionRequest, CompletionResponse, EntailmentJudge, EntailmentVerdict};
use crate::error::BackendError;
use crate::text::{content_tokens, tokenize, whitespace_tokens};

/// Returns queued completions in order; errors once the queue is empty.
/// Token counts are whitespace tokens of the prompt and of the returned text.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    queue: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedLlm {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(script.into_iter().map(Into::into).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, completion: impl Into<String>) {
        self.queue.lock().unwrap().push_back(completion.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl CompletionBackend for ScriptedLlm {
    fn name(&self) -> String {
        "mock:scripted".into()
    }

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let raw = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(BackendError::ScriptExhausted)?;
        self.prompts.lock().unwrap().push(req.prompt.clone());
        let text = super::truncate_at_stop(&raw, &req.stop_sequences);
        Ok(CompletionResponse {
            prompt_tokens: whitespace_tokens(&req.prompt),
            completion_tokens: whitespace_tokens(&text),
            text,
        })
    }
}

type Responder = dyn Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync;

/// Completion backend driven by a closure over the request.
pub struct FnLlm {
    respond: Box<Responder>,
}

impl FnLlm {
    pub fn new<F>(respond: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        Self {
            respond: Box::new(respond),
        }
    }
}

impl CompletionBackend for FnLlm {
    fn name(&self) -> String {
        "mock:fn".into()
    }

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let text = super::truncate_at_stop(&(self.respond)(req)?, &req.stop_sequences);
        Ok(CompletionResponse {
            prompt_tokens: whitespace_tokens(&req.prompt),
            completion_tokens: whitespace_tokens(&text),
            text,
        })
    }
}

/// The containment oracle: a hypothesis is entailed iff every content token
/// of it (see [`crate::text::content_tokens`]) occurs among the premise
/// tokens. The score is the covered fraction of content tokens; a hypothesis
/// without content tokens is entailed with score 1.
///
/// Monotone in the premise: adding text to an entailing premise keeps it
/// entailing.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContainmentJudge;

impl ContainmentJudge {
    pub fn new() -> Self {
        Self
    }

    pub fn verdict(premise: &str, hypothesis: &str) -> EntailmentVerdict {
        let premise: HashSet<String> = tokenize(premise).into_iter().collect();
        let needed: HashSet<String> = content_tokens(hypothesis).into_iter().collect();
        if needed.is_empty() {
            return EntailmentVerdict {
                entailed: true,
                score: 1.0,
            };
        }
        let covered = needed.iter().filter(|t| premise.contains(*t)).count();
        EntailmentVerdict {
            entailed: covered == needed.len(),
            score: covered as f64 / needed.len() as f64,
        }
    }
}

impl EntailmentJudge for ContainmentJudge {
    fn name(&self) -> String {
        "oracle:containment".into()
    }

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        Ok(Self::verdict(premise, hypothesis))
    }
}

type Decider = dyn Fn(&str, &str) -> bool + Send + Sync;

/// Judge driven by a closure over (premise, hypothesis).
pub struct FnJudge {
    decide: Box<Decider>,
}

impl FnJudge {
    pub fn new<F>(decide: F) -> Self
    where
        F: Fn(&str, &str) -> bool + Send + Sync + 'static,
    {
        Self {
            decide: Box::new(decide),
        }
    }
}

impl EntailmentJudge for FnJudge {
    fn name(&self) -> String {
        "mock:fn".into()
    }

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        let entailed = (self.decide)(premise, hypothesis);
        Ok(EntailmentVerdict {
            entailed,
            score: if entailed { 1.0 } else { 0.0 },
        })
    }
}
