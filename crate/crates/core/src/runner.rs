//! Batch plumbing shared by the command-line tool and the Python bindings:
//! question and script files, backend construction from a config, and the
//! run manifest written next to every output file.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{CompletionBackend, ContainmentJudge, EntailmentJudge, HttpCompletion, RemoteJudge, ScriptedLlm};
use crate::config::{Config, JudgeConfig, JudgeKind, LlmConfig, PromptConfig};
use crate::corpus::IndexStats;
use crate::error::{Error, Result};
use crate::prompts::Templates;
use crate::response::VerifiedResponse;
use crate::trace::TokenUsage;
use crate::types::Question;

fn read_jsonl<T, R>(input: R, what: &str, id_of: impl Fn(&T) -> &str) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: format!("malformed {what}: {e}"),
        })?;
        let id = id_of(&rec).to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { line: n + 1, id });
        }
        out.push(rec);
    }
    Ok(out)
}

/// One `{"id", "text", "gold"?}` object per line.
pub fn parse_questions<R: BufRead>(input: R) -> Result<Vec<Question>> {
    read_jsonl(input, "question record", |q: &Question| &q.id)
}

pub fn read_questions(path: &Path) -> Result<Vec<Question>> {
    parse_questions(BufReader::new(fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub question_id: String,
    pub completions: Vec<String>,
}

/// Scripted completions keyed by question, one `{"question_id",
/// "completions"}` object per line. Each question gets its own queue so
/// results do not depend on worker scheduling.
pub fn parse_script<R: BufRead>(input: R) -> Result<HashMap<String, Vec<String>>> {
    Ok(read_jsonl(input, "script record", |r: &ScriptRecord| &r.question_id)?
        .into_iter()
        .map(|r| (r.question_id, r.completions))
        .collect())
}

/// Where completions come from during a batch.
pub enum LlmSource {
    Script {
        path: PathBuf,
        book: HashMap<String, Vec<String>>,
    },
    Http(HttpCompletion),
}

impl LlmSource {
    pub fn from_config(cfg: &LlmConfig) -> Result<Self> {
        match cfg.provider() {
            None => {
                let path = cfg.script.clone().ok_or_else(|| Error::Config {
                    key: "llm.script".into(),
                    reason: "required for the script backend".into(),
                })?;
                let book = parse_script(BufReader::new(fs::File::open(&path)?))?;
                Ok(LlmSource::Script { path, book })
            }
            Some(provider) => {
                let base = cfg.base_url.clone().ok_or_else(|| Error::Config {
                    key: "llm.base_url".into(),
                    reason: "required for remote completion backends".into(),
                })?;
                let token = match &cfg.api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| Error::Config {
                        key: "llm.api_key_env".into(),
                        reason: format!("environment variable `{var}` is not set"),
                    })?),
                    None => None,
                };
                let model = cfg.model.clone().unwrap_or_default();
                Ok(LlmSource::Http(HttpCompletion::new(provider, base, model, token, cfg.retry)))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            LlmSource::Script { path, .. } => format!("script:{}", path.display()),
            LlmSource::Http(h) => h.name(),
        }
    }

    pub fn for_question(&self, question_id: &str) -> Result<Box<dyn CompletionBackend + '_>> {
        match self {
            LlmSource::Script { book, .. } => {
                let script = book.get(question_id).ok_or_else(|| {
                    Error::Precondition(format!("script has no completions for question `{question_id}`"))
                })?;
                Ok(Box::new(ScriptedLlm::new(script.iter().cloned())))
            }
            LlmSource::Http(h) => Ok(Box::new(h)),
        }
    }
}

/// Judge described by `cfg`. A remote judge must pass its health check.
pub fn build_judge(cfg: &JudgeConfig) -> Result<Box<dyn EntailmentJudge>> {
    match cfg.backend {
        JudgeKind::Oracle => Ok(Box::new(ContainmentJudge::new())),
        JudgeKind::Remote => {
            let url = cfg.url.clone().ok_or_else(|| Error::Config {
                key: "judge.url".into(),
                reason: "required for the remote judge".into(),
            })?;
            let judge = RemoteJudge::new(url, cfg.threshold, cfg.retry);
            judge.health()?;
            Ok(Box::new(judge))
        }
    }
}

pub fn build_templates(cfg: &PromptConfig) -> Result<Templates> {
    let templates = match &cfg.dir {
        Some(dir) => Templates::load_dir(dir)?,
        None => Templates::default(),
    };
    Ok(if cfg.zero_shot { templates.without_demos() } else { templates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionStatus {
    pub id: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub units: usize,
    pub token_usage: TokenUsage,
}

/// Provenance for one output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// `run` or `baseline:<system>`.
    pub command: String,
    pub config: Config,
    pub index_fingerprint: String,
    pub index_stats: IndexStats,
    pub llm: String,
    pub judge: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub questions: Vec<QuestionStatus>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.questions.iter().filter(|q| q.status == RunStatus::Failed).count()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// `out.jsonl` → `out.jsonl.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A finished question: the response when it succeeded, and its status line.
#[derive(Debug, Clone)]
pub struct QuestionOutcome {
    pub response: Option<VerifiedResponse>,
    pub status: QuestionStatus,
}

/// Answer every question on a pool of `workers` threads (0 picks the number
/// of available cores). Outcomes come back in input order.
pub fn run_batch<F>(questions: &[Question], workers: usize, answer: F) -> Result<Vec<QuestionOutcome>>
where
    F: Fn(&Question) -> std::result::Result<VerifiedResponse, (Error, Option<Box<VerifiedResponse>>)> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        questions
            .par_iter()
            .map(|q| match answer(q) {
                Ok(resp) => QuestionOutcome {
                    status: QuestionStatus {
                        id: q.id.clone(),
                        status: RunStatus::Ok,
                        error: None,
                        units: resp.units.len(),
                        token_usage: resp.token_usage,
                    },
                    response: Some(resp),
                },
                Err((err, partial)) => QuestionOutcome {
                    status: QuestionStatus {
                        id: q.id.clone(),
                        status: RunStatus::Failed,
                        error: Some(err.to_string()),
                        units: partial.as_ref().map_or(0, |p| p.units.len()),
                        token_usage: partial.as_ref().map(|p| p.token_usage).unwrap_or_default(),
                    },
                    response: None,
                },
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn questions_and_scripts_parse() {
        let qs = parse_questions("{\"id\":\"q1\",\"text\":\"Why?\"}\n\n{\"id\":\"q2\",\"text\":\"How?\",\"gold\":[\"so\"]}\n".as_bytes()).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[1].gold.as_deref(), Some(&["so".to_string()][..]));
        assert!(parse_questions("{\"id\":\"q\",\"text\":\"a\"}\n{\"id\":\"q\",\"text\":\"b\"}\n".as_bytes()).is_err());
        let book = parse_script("{\"question_id\":\"q1\",\"completions\":[\"a\",\"\"]}\n".as_bytes()).unwrap();
        assert_eq!(book["q1"], vec!["a", ""]);
    }

    #[test]
    fn bad_line_reports_line_number() {
        match parse_questions("{\"id\":\"q\",\"text\":\"a\"}\nnot json\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("out/x.jsonl")), Path::new("out/x.jsonl.manifest.json"));
    }

    #[test]
    fn batch_preserves_order() {
        let qs: Vec<Question> = (0..20).map(|i| Question::new(format!("q{i}"), "t")).collect();
        let out = run_batch(&qs, 4, |q| {
            if q.id == "q3" {
                Err((Error::Precondition("boom".into()), None))
            } else {
                Ok(VerifiedResponse::new(q.id.clone(), vec![]))
            }
        })
        .unwrap();
        let ids: Vec<_> = out.iter().map(|o| o.status.id.as_str()).collect();
        assert_eq!(ids, qs.iter().map(|q| q.id.as_str()).collect::<Vec<_>>());
        assert_eq!(out[3].status.status, RunStatus::Failed);
        assert!(out[3].response.is_none());
    }
}
