//! HTTP clients for hosted completion models and the entailment sidecar.
//!
//! Entailment wire protocol:
//!
//! ```text
//! POST {base}/entail   {"premise": "...", "hypothesis": "..."}
//!                   -> {"entailed": true, "score": 0.97, ...}
//! GET  {base}/healthz -> {"status": "ok", ...}
//! ```
//!
//! `entailed` is used when present; otherwise `score >= threshold`.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{CompletionBackend, CompletionRequest, CompletionResponse, EntailmentJudge, EntailmentVerdict};
use crate::error::BackendError;
use crate::text::whitespace_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubled on each further retry.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 60,
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, mut call: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut attempt = 0u32;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retriable() && attempt < self.max_retries => {
                    let delay = self.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) if e.is_retriable() => {
                    return Err(BackendError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn agent(timeout_secs: u64) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn transport(e: ureq::Error) -> BackendError {
    BackendError::Transport(e.to_string())
}

fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
    agent: &Agent,
    url: &str,
    token: Option<&str>,
    body: &B,
) -> Result<R, BackendError> {
    let mut req = agent.post(url);
    if let Some(token) = token {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req.send_json(body).map_err(transport)?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        return Err(BackendError::Status { status, body });
    }
    let text = resp.body_mut().read_to_string().map_err(transport)?;
    serde_json::from_str(&text).map_err(|e| BackendError::Decode(format!("{e}: {text}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionProvider {
    /// `POST {base}/completions` in the OpenAI completions shape. Works for
    /// hosted completion models and for OpenAI-compatible local servers.
    Openai,
    /// `POST {base}/complete` with `{prompt, max_tokens, temperature, stop,
    /// model}` returning `{text, prompt_tokens?, completion_tokens?}`.
    Plain,
}

pub struct HttpCompletion {
    provider: CompletionProvider,
    base_url: String,
    model: String,
    token: Option<String>,
    retry: RetryPolicy,
    agent: Agent,
}

impl HttpCompletion {
    pub fn new(
        provider: CompletionProvider,
        base_url: impl Into<String>,
        model: impl Into<String>,
        token: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        Self {
            provider,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            token,
            agent: agent(retry.timeout_secs),
            retry,
        }
    }

    fn call_openai(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        #[derive(Serialize)]
        struct Body<'a> {
            model: &'a str,
            prompt: &'a str,
            max_tokens: u32,
            temperature: f64,
            #[serde(skip_serializing_if = "<[String]>::is_empty")]
            stop: &'a [String],
        }
        #[derive(Deserialize)]
        struct Choice {
            text: String,
        }
        #[derive(Deserialize)]
        struct Usage {
            prompt_tokens: u64,
            completion_tokens: u64,
        }
        #[derive(Deserialize)]
        struct Reply {
            choices: Vec<Choice>,
            usage: Option<Usage>,
        }
        let body = Body {
            model: &self.model,
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
            temperature: req.temperature,
            stop: &req.stop_sequences,
        };
        let url = format!("{}/completions", self.base_url);
        let reply: Reply = post_json(&self.agent, &url, self.token.as_deref(), &body)?;
        let text = reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| BackendError::Decode("response has no choices".into()))?;
        let (prompt_tokens, completion_tokens) = match reply.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (whitespace_tokens(&req.prompt), whitespace_tokens(&text)),
        };
        Ok(CompletionResponse {
            text,
            prompt_tokens,
            completion_tokens,
        })
    }

    fn call_plain(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        #[derive(Serialize)]
        struct Body<'a> {
            model: &'a str,
            prompt: &'a str,
            max_tokens: u32,
            temperature: f64,
            stop: &'a [String],
        }
        #[derive(Deserialize)]
        struct Reply {
            text: String,
            prompt_tokens: Option<u64>,
            completion_tokens: Option<u64>,
        }
        let body = Body {
            model: &self.model,
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
            temperature: req.temperature,
            stop: &req.stop_sequences,
        };
        let url = format!("{}/complete", self.base_url);
        let reply: Reply = post_json(&self.agent, &url, self.token.as_deref(), &body)?;
        Ok(CompletionResponse {
            prompt_tokens: reply.prompt_tokens.unwrap_or_else(|| whitespace_tokens(&req.prompt)),
            completion_tokens: reply
                .completion_tokens
                .unwrap_or_else(|| whitespace_tokens(&reply.text)),
            text: reply.text,
        })
    }
}

impl CompletionBackend for HttpCompletion {
    fn name(&self) -> String {
        let provider = match self.provider {
            CompletionProvider::Openai => "openai",
            CompletionProvider::Plain => "plain",
        };
        format!("{provider}:{}", self.model)
    }

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.retry.run(|| match self.provider {
            CompletionProvider::Openai => self.call_openai(req),
            CompletionProvider::Plain => self.call_plain(req),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntailRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntailResponse {
    #[serde(default)]
    pub entailed: Option<bool>,
    pub score: f64,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub truncated: Option<bool>,
}

pub struct RemoteJudge {
    base_url: String,
    threshold: f64,
    retry: RetryPolicy,
    agent: Agent,
}

impl RemoteJudge {
    pub fn new(base_url: impl Into<String>, threshold: f64, retry: RetryPolicy) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            threshold,
            agent: agent(retry.timeout_secs),
            retry,
        }
    }

    /// `Ok(body)` when `/healthz` answers 200.
    pub fn health(&self) -> Result<serde_json::Value, BackendError> {
        let url = format!("{}/healthz", self.base_url);
        let mut resp = self.agent.get(&url).call().map_err(transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        if status != 200 {
            return Err(BackendError::Status { status, body });
        }
        serde_json::from_str(&body).map_err(|e| BackendError::Decode(e.to_string()))
    }
}

impl EntailmentJudge for RemoteJudge {
    fn name(&self) -> String {
        format!("remote:{}", self.base_url)
    }

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        let body = EntailRequest {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        let url = format!("{}/entail", self.base_url);
        let reply: EntailResponse = self.retry.run(|| post_json(&self.agent, &url, None, &body))?;
        if !(0.0..=1.0).contains(&reply.score) {
            return Err(BackendError::Decode(format!("score {} outside [0, 1]", reply.score)));
        }
        Ok(EntailmentVerdict {
            entailed: reply.entailed.unwrap_or(reply.score >= self.threshold),
            score: reply.score,
        })
    }
}
