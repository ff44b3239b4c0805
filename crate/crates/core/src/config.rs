//! Run configuration.
//!
//! The file format is TOML with one section per concern:
//!
//! ```toml
//! [engine]
//! max_trials = 3        # T
//! query_count = 2       # M
//! docs_per_query = 3    # N
//! initial_docs = 5      # k
//! max_citations = 3
//!
//! [baseline]
//! k = 5
//! K = 10
//! rerank_samples = 4
//! rerank_temperature = 1.0
//!
//! [llm]
//! backend = "script"    # script | openai | plain
//! script = "script.jsonl"
//!
//! [judge]
//! backend = "oracle"    # oracle | remote
//! ```
//!
//! Unset keys take the defaults below. Secrets are read from the environment
//! variable named by `llm.api_key_env`, never from the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::{CompletionProvider, RetryPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Maximum trials per claim before forced acceptance.
    pub max_trials: usize,
    /// Queries generated per evidence search.
    pub query_count: usize,
    /// Documents retrieved per generated query.
    pub docs_per_query: usize,
    /// Documents seeded into long-term memory from the question.
    pub initial_docs: usize,
    /// Cap on citations parsed from one citation-generator completion.
    pub max_citations: usize,
    /// Hard cap on pipeline steps; defaults to `10 * (T + 1) * expected_claims`.
    pub max_steps: Option<usize>,
    pub expected_claims: usize,
    pub long_term_cap: Option<usize>,
    pub end_marker: String,
    pub claim_max_tokens: u32,
    pub citation_max_tokens: u32,
    pub query_max_tokens: u32,
    pub temperature: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_trials: 3,
            query_count: 2,
            docs_per_query: 3,
            initial_docs: 5,
            max_citations: 3,
            max_steps: None,
            expected_claims: 10,
            long_term_cap: None,
            end_marker: "<EOS>".into(),
            claim_max_tokens: 128,
            citation_max_tokens: 256,
            query_max_tokens: 256,
            temperature: 0.0,
        }
    }
}

impl EngineConfig {
    pub fn with_trials(mut self, t: usize) -> Self {
        self.max_trials = t;
        self
    }

    pub fn step_cap(&self) -> usize {
        self.max_steps
            .unwrap_or(10 * (self.max_trials + 1) * self.expected_claims.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        positive("engine.query_count", self.query_count)?;
        positive("engine.docs_per_query", self.docs_per_query)?;
        positive("engine.initial_docs", self.initial_docs)?;
        positive("engine.max_citations", self.max_citations)?;
        if let Some(cap) = self.max_steps {
            positive("engine.max_steps", cap)?;
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(invalid("engine.temperature", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Documents for direct prompting (vanilla, rerank).
    pub k: usize,
    /// Documents for summarize / snippet.
    pub big_k: usize,
    pub rerank_samples: usize,
    pub rerank_temperature: f64,
    pub answer_max_tokens: u32,
    pub condense_max_tokens: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            big_k: 10,
            rerank_samples: 4,
            rerank_temperature: 1.0,
            answer_max_tokens: 512,
            condense_max_tokens: 128,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        positive("baseline.k", self.k)?;
        positive("baseline.rerank_samples", self.rerank_samples)?;
        if self.k > self.big_k {
            return Err(invalid("baseline.k", "must not exceed baseline.K"));
        }
        if self.rerank_temperature.is_nan() || self.rerank_temperature < 0.0 {
            return Err(invalid("baseline.rerank_temperature", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmBackendKind {
    Script,
    Openai,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub backend: LlmBackendKind,
    pub script: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: LlmBackendKind::Script,
            script: None,
            base_url: None,
            model: None,
            api_key_env: None,
            retry: RetryPolicy::default(),
        }
    }
}

impl LlmConfig {
    pub fn provider(&self) -> Option<CompletionProvider> {
        match self.backend {
            LlmBackendKind::Script => None,
            LlmBackendKind::Openai => Some(CompletionProvider::Openai),
            LlmBackendKind::Plain => Some(CompletionProvider::Plain),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub backend: JudgeKind,
    pub url: Option<String>,
    pub threshold: f64,
    pub retry: RetryPolicy,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            backend: JudgeKind::Oracle,
            url: None,
            threshold: 0.5,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    /// Directory of `<name>.txt` / `<name>.demos.txt` overrides.
    pub dir: Option<PathBuf>,
    /// Drop the shipped demonstrations.
    pub zero_shot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Character budget for a judge premise; each document is head-truncated
    /// to an equal share when the concatenation exceeds it.
    pub premise_char_budget: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            premise_char_budget: Some(32_000),
        }
    }
}

/// Everything a CLI run needs, as loaded from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub engine: EngineConfig,
    pub baseline: BaselineConfig,
    pub llm: LlmConfig,
    pub judge: JudgeConfig,
    pub prompts: PromptConfig,
    pub eval: EvalConfig,
}

fn positive(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(invalid(key, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn invalid(key: &str, reason: &str) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

// Raw, fully optional mirror of the file so that range errors name the key
// instead of surfacing as a generic deserialization failure.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    baseline: RawBaseline,
    #[serde(default)]
    llm: RawLlm,
    #[serde(default)]
    judge: RawJudge,
    #[serde(default)]
    prompts: RawPrompts,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    #[serde(alias = "T")]
    max_trials: Option<i64>,
    #[serde(alias = "M")]
    query_count: Option<i64>,
    #[serde(alias = "N")]
    docs_per_query: Option<i64>,
    #[serde(alias = "k")]
    initial_docs: Option<i64>,
    max_citations: Option<i64>,
    max_steps: Option<i64>,
    expected_claims: Option<i64>,
    long_term_cap: Option<i64>,
    end_marker: Option<String>,
    claim_max_tokens: Option<i64>,
    citation_max_tokens: Option<i64>,
    query_max_tokens: Option<i64>,
    temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaseline {
    k: Option<i64>,
    #[serde(rename = "K")]
    big_k: Option<i64>,
    rerank_samples: Option<i64>,
    rerank_temperature: Option<f64>,
    answer_max_tokens: Option<i64>,
    condense_max_tokens: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLlm {
    backend: Option<LlmBackendKind>,
    script: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    retries: Option<i64>,
    backoff_ms: Option<i64>,
    timeout_secs: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJudge {
    backend: Option<JudgeKind>,
    url: Option<String>,
    threshold: Option<f64>,
    retries: Option<i64>,
    backoff_ms: Option<i64>,
    timeout_secs: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrompts {
    dir: Option<PathBuf>,
    zero_shot: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    premise_char_budget: Option<i64>,
}

fn non_negative(key: &str, v: Option<i64>, default: usize) -> Result<usize> {
    match v {
        None => Ok(default),
        Some(x) if x < 0 => Err(invalid(key, &format!("must be non-negative, got {x}"))),
        Some(x) => Ok(x as usize),
    }
}

fn optional(key: &str, v: Option<i64>, default: Option<usize>) -> Result<Option<usize>> {
    match v {
        None => Ok(default),
        Some(0) => Ok(None),
        Some(x) => non_negative(key, Some(x), 0).map(Some),
    }
}

fn tokens(key: &str, v: Option<i64>, default: u32) -> Result<u32> {
    let n = non_negative(key, v, default as usize)?;
    u32::try_from(n).map_err(|_| invalid(key, "too large"))
}

fn retry(section: &str, retries: Option<i64>, backoff_ms: Option<i64>, timeout_secs: Option<i64>) -> Result<RetryPolicy> {
    let d = RetryPolicy::default();
    Ok(RetryPolicy {
        max_retries: non_negative(&format!("{section}.retries"), retries, d.max_retries as usize)? as u32,
        backoff_ms: non_negative(&format!("{section}.backoff_ms"), backoff_ms, d.backoff_ms as usize)? as u64,
        timeout_secs: non_negative(&format!("{section}.timeout_secs"), timeout_secs, d.timeout_secs as usize)? as u64,
    })
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(script) = cfg.llm.script.as_mut() {
            if script.is_relative() {
                *script = base.join(&*script);
            }
        }
        if let Some(dir) = cfg.prompts.dir.as_mut() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("<file>")
                .to_string(),
            reason: e.to_string().trim().to_string(),
        })?;
        let e = EngineConfig::default();
        let r = raw.engine;
        let engine = EngineConfig {
            max_trials: non_negative("engine.max_trials", r.max_trials, e.max_trials)?,
            query_count: non_negative("engine.query_count", r.query_count, e.query_count)?,
            docs_per_query: non_negative("engine.docs_per_query", r.docs_per_query, e.docs_per_query)?,
            initial_docs: non_negative("engine.initial_docs", r.initial_docs, e.initial_docs)?,
            max_citations: non_negative("engine.max_citations", r.max_citations, e.max_citations)?,
            max_steps: optional("engine.max_steps", r.max_steps, e.max_steps)?,
            expected_claims: non_negative("engine.expected_claims", r.expected_claims, e.expected_claims)?,
            long_term_cap: optional("engine.long_term_cap", r.long_term_cap, e.long_term_cap)?,
            end_marker: r.end_marker.unwrap_or(e.end_marker),
            claim_max_tokens: tokens("engine.claim_max_tokens", r.claim_max_tokens, e.claim_max_tokens)?,
            citation_max_tokens: tokens("engine.citation_max_tokens", r.citation_max_tokens, e.citation_max_tokens)?,
            query_max_tokens: tokens("engine.query_max_tokens", r.query_max_tokens, e.query_max_tokens)?,
            temperature: r.temperature.unwrap_or(e.temperature),
        };
        engine.validate()?;

        let b = BaselineConfig::default();
        let rb = raw.baseline;
        let baseline = BaselineConfig {
            k: non_negative("baseline.k", rb.k, b.k)?,
            big_k: non_negative("baseline.K", rb.big_k, b.big_k)?,
            rerank_samples: non_negative("baseline.rerank_samples", rb.rerank_samples, b.rerank_samples)?,
            rerank_temperature: rb.rerank_temperature.unwrap_or(b.rerank_temperature),
            answer_max_tokens: tokens("baseline.answer_max_tokens", rb.answer_max_tokens, b.answer_max_tokens)?,
            condense_max_tokens: tokens("baseline.condense_max_tokens", rb.condense_max_tokens, b.condense_max_tokens)?,
        };
        baseline.validate()?;

        let l = LlmConfig::default();
        let llm = LlmConfig {
            backend: raw.llm.backend.unwrap_or(l.backend),
            script: raw.llm.script,
            base_url: raw.llm.base_url,
            model: raw.llm.model,
            api_key_env: raw.llm.api_key_env,
            retry: retry("llm", raw.llm.retries, raw.llm.backoff_ms, raw.llm.timeout_secs)?,
        };
        let j = JudgeConfig::default();
        let judge = JudgeConfig {
            backend: raw.judge.backend.unwrap_or(j.backend),
            url: raw.judge.url,
            threshold: raw.judge.threshold.unwrap_or(j.threshold),
            retry: retry("judge", raw.judge.retries, raw.judge.backoff_ms, raw.judge.timeout_secs)?,
        };
        if !(0.0..=1.0).contains(&judge.threshold) {
            return Err(invalid("judge.threshold", "must lie in [0, 1]"));
        }
        if judge.backend == JudgeKind::Remote && judge.url.is_none() {
            return Err(invalid("judge.url", "required when judge.backend = \"remote\""));
        }
        if llm.backend != LlmBackendKind::Script && llm.base_url.is_none() {
            return Err(invalid("llm.base_url", "required for remote completion backends"));
        }

        Ok(Config {
            engine,
            baseline,
            llm,
            judge,
            prompts: PromptConfig {
                dir: raw.prompts.dir,
                zero_shot: raw.prompts.zero_shot.unwrap_or(false),
            },
            eval: EvalConfig {
                premise_char_budget: optional(
                    "eval.premise_char_budget",
                    raw.eval.premise_char_budget,
                    EvalConfig::default().premise_char_budget,
                )?,
            },
        })
    }
}
