//! Evidence finder: context-aware query generation plus per-query retrieval
//! to rebuild short-term memory.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::backends::{CompletionBackend, CompletionRequest};
use crate::config::EngineConfig;
use crate::corpus::Retriever;
use crate::error::{Error, Result};
use crate::prompts::{self, Templates};
use crate::types::Document;

/// Shown in the query prompt when nothing has been accepted yet.
pub const EMPTY_CONTEXT: &str = "(none)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBatch {
    pub queries: Vec<String>,
    pub source_claim: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub queries: Vec<String>,
    pub documents: Vec<Document>,
    /// True when the claim itself was used because no query could be parsed.
    pub fell_back: bool,
}

pub fn render_query_prompt(
    templates: &Templates,
    question: &str,
    answer_so_far: &[String],
    claim: &str,
    query_count: usize,
) -> Result<String> {
    if query_count == 0 {
        return Err(Error::Precondition("query count must be at least 1".into()));
    }
    let context = if answer_so_far.is_empty() {
        EMPTY_CONTEXT.to_string()
    } else {
        answer_so_far.join(" ")
    };
    let count = query_count.to_string();
    templates.render(
        prompts::QUERY,
        &[("Question", question), ("Context", &context), ("Claim", claim), ("qg_num", &count)],
    )
}

fn strip_enumeration(line: &str) -> &str {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix(['-', '*', '•']) {
        return rest.trim_start();
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')', ':']) {
            return rest.trim_start();
        }
    }
    line
}

/// One query per non-empty line, enumeration prefixes removed, at most
/// `query_count` kept.
pub fn parse_queries(completion: &str, claim: &str, query_count: usize) -> QueryBatch {
    let queries = completion
        .lines()
        .map(strip_enumeration)
        .filter(|q| !q.is_empty())
        .take(query_count)
        .map(str::to_string)
        .collect();
    QueryBatch {
        queries,
        source_claim: claim.to_string(),
    }
}

/// Generate up to M queries, retrieve N documents for each and concatenate
/// the results query by query, keeping the first occurrence of every id.
pub fn find_evidence(
    llm: &dyn CompletionBackend,
    retriever: &dyn Retriever,
    templates: &Templates,
    cfg: &EngineConfig,
    question: &str,
    answer_so_far: &[String],
    claim: &str,
) -> Result<Evidence> {
    let (m, n) = (cfg.query_count, cfg.docs_per_query);
    if n == 0 {
        return Err(Error::Precondition("documents per query must be at least 1".into()));
    }
    let prompt = render_query_prompt(templates, question, answer_so_far, claim, m)?;
    let req = CompletionRequest::new(prompt)
        .max_tokens(cfg.query_max_tokens)
        .temperature(cfg.temperature)
        .stop(&["\n\n"]);
    let resp = llm.complete(&req)?;
    let mut batch = parse_queries(&resp.text, claim, m);
    let fell_back = batch.queries.is_empty();
    if fell_back {
        batch.queries.push(claim.to_string());
    }

    let per_query: Vec<Vec<Document>> = batch
        .queries
        .iter()
        .map(|q| retriever.retrieve_documents(q, n))
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    let documents = per_query
        .into_iter()
        .flatten()
        .filter(|d| seen.insert(d.id.clone()))
        .collect();
    Ok(Evidence {
        queries: batch.queries,
        documents,
        fell_back,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedLlm;
    use crate::corpus::LexicalIndex;

    fn index() -> LexicalIndex {
        LexicalIndex::build(vec![
            Document::new("a1", "", "alpha one"),
            Document::new("a2", "", "alpha two"),
            Document::new("a3", "", "alpha three"),
            Document::new("b1", "", "beta one"),
            Document::new("b2", "", "beta two"),
            Document::new("b3", "", "beta three"),
            Document::new("x", "", "gamma shared"),
        ])
        .unwrap()
    }

    fn cfg(m: usize, n: usize) -> EngineConfig {
        EngineConfig {
            query_count: m,
            docs_per_query: n,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn query_prompt_bindings() {
        let t = Templates::default();
        let p = render_query_prompt(&t, "Q?", &[], "The claim.", 2).unwrap();
        assert!(p.contains("up to 2 questions"));
        assert!(p.contains("no more than 2 questions"));
        assert!(p.contains("The context is as follows: (none)."));
        assert!(p.contains("diverse and focus on different aspects"));
        let p = render_query_prompt(&t, "Q?", &["One.".into()], "c", 4).unwrap();
        assert!(p.contains("up to 4 questions"));
        assert!(p.contains("The context is as follows: One.."));
        assert!(render_query_prompt(&t, "Q?", &[], "c", 0).is_err());
    }

    #[test]
    fn parse_strips_enumeration() {
        let b = parse_queries("1. Who found X?\n2. When was X?", "c", 2);
        assert_eq!(b.queries, vec!["Who found X?", "When was X?"]);
        let b = parse_queries("- a\n* b\n3) c\n\n", "c", 5);
        assert_eq!(b.queries, vec!["a", "b", "c"]);
    }

    #[test]
    fn parse_truncates_to_m() {
        let b = parse_queries("a\nb\nc\nd\ne", "c", 2);
        assert_eq!(b.queries, vec!["a", "b"]);
        assert!(parse_queries("", "c", 2).queries.is_empty());
    }

    #[test]
    fn query_major_concatenation() {
        let llm = ScriptedLlm::new(["1. alpha\n2. beta"]);
        let ev = find_evidence(&llm, &index(), &Templates::default(), &cfg(2, 3), "q", &[], "claim").unwrap();
        let ids: Vec<_> = ev.documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["a1", "a2", "a3", "b1", "b2", "b3"]);
        assert!(!ev.fell_back);
    }

    #[test]
    fn shared_top_result_appears_once() {
        let llm = ScriptedLlm::new(["gamma alpha\ngamma beta"]);
        let ev = find_evidence(&llm, &index(), &Templates::default(), &cfg(2, 2), "q", &[], "c").unwrap();
        assert_eq!(ev.documents.iter().filter(|d| d.id == "x").count(), 1);
        assert_eq!(ev.documents[0].id, "x");
    }

    #[test]
    fn empty_completion_falls_back_to_claim() {
        let llm = ScriptedLlm::new([""]);
        let ev = find_evidence(&llm, &index(), &Templates::default(), &cfg(2, 3), "q", &[], "beta").unwrap();
        assert!(ev.fell_back);
        assert_eq!(ev.queries, vec!["beta"]);
        assert!(ev.documents.len() <= 3);
        assert!(ev.documents.iter().all(|d| d.id.starts_with('b')));
    }
}
