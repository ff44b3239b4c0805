//! Model backends: a text-completion contract standing in for the LLM and an
//! entailment contract standing in for the NLI model.

mod mock;
mod remote;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use mock::{ContainmentJudge, FnJudge, FnLlm, ScriptedLlm};
pub use remote::{CompletionProvider, HttpCompletion, RemoteJudge, RetryPolicy};

use crate::error::BackendError;
use crate::trace::{CallKind, CallRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: 256,
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn stop(mut self, stops: &[&str]) -> Self {
        self.stop_sequences = stops.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentVerdict {
    pub entailed: bool,
    pub score: f64,
}

/// Cut `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop(text: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}

pub trait CompletionBackend: Send + Sync {
    /// Identifier recorded in run manifests.
    fn name(&self) -> String;

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;

    /// Validates the request and applies stop-sequence truncation to the
    /// returned text.
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let mut resp = self.complete_raw(req)?;
        resp.text = truncate_at_stop(&resp.text, &req.stop_sequences);
        Ok(resp)
    }
}

pub trait EntailmentJudge: Send + Sync {
    fn name(&self) -> String;

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError>;

    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        if hypothesis.trim().is_empty() {
            return Err(BackendError::InvalidRequest("hypothesis is empty".into()));
        }
        if premise.trim().is_empty() {
            return Err(BackendError::InvalidRequest("premise is empty".into()));
        }
        self.judge_raw(premise, hypothesis)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn name(&self) -> String {
        (**self).name()
    }
    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete_raw(req)
    }
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(req)
    }
}

impl<T: EntailmentJudge + ?Sized> EntailmentJudge for &T {
    fn name(&self) -> String {
        (**self).name()
    }
    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        (**self).judge_raw(premise, hypothesis)
    }
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        (**self).judge(premise, hypothesis)
    }
}

/// Shared record of backend calls made during one run.
#[derive(Debug, Default)]
pub struct CallLog {
    calls: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, record: CallRecord) {
        self.calls.lock().unwrap().push(record);
    }

    pub fn snapshot(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }

    pub fn count(&self, kind: CallKind) -> u64 {
        self.calls.lock().unwrap().iter().filter(|c| c.kind == kind).count() as u64
    }

    pub fn judge_calls(&self) -> u64 {
        self.count(CallKind::Judge)
    }
}

/// Completion backend wrapper that logs every successful call.
pub struct MeteredLlm<'a> {
    inner: &'a dyn CompletionBackend,
    log: &'a CallLog,
}

impl<'a> MeteredLlm<'a> {
    pub fn new(inner: &'a dyn CompletionBackend, log: &'a CallLog) -> Self {
        Self { inner, log }
    }
}

impl CompletionBackend for MeteredLlm<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.complete(req)
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let resp = self.inner.complete(req)?;
        self.log.push(CallRecord {
            kind: CallKind::Completion,
            prompt_tokens: resp.prompt_tokens,
            completion_tokens: resp.completion_tokens,
        });
        Ok(resp)
    }
}

/// Judge wrapper that logs every successful call.
pub struct MeteredJudge<'a> {
    inner: &'a dyn EntailmentJudge,
    log: &'a CallLog,
}

impl<'a> MeteredJudge<'a> {
    pub fn new(inner: &'a dyn EntailmentJudge, log: &'a CallLog) -> Self {
        Self { inner, log }
    }
}

impl EntailmentJudge for MeteredJudge<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        self.judge(premise, hypothesis)
    }

    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        let verdict = self.inner.judge(premise, hypothesis)?;
        self.log.push(CallRecord {
            kind: CallKind::Judge,
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Ok(verdict)
    }
}
