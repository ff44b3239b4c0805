//! Claim generation and citation generation as two separate model calls.
//!
//! The claim generator continues the answer by one sentence over the merged
//! memory view. The citation generator is then asked to annotate that fixed
//! sentence with `[i]` markers; only the markers are read back, so the
//! claim text can never be rewritten by the citation step.

use serde::{Deserialize, Serialize};

use crate::backends::{CompletionBackend, CompletionRequest};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryView;
use crate::prompts::{self, count_word, format_documents, Templates};
use crate::text::{citation_markers, split_sentences, strip_citation_markers};
use crate::types::Document;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimKind {
    Claim(String),
    EndOfAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub kind: ClaimKind,
    pub raw_completion: String,
}

impl ClaimResult {
    pub fn claim(&self) -> Option<&str> {
        match &self.kind {
            ClaimKind::Claim(c) => Some(c),
            ClaimKind::EndOfAnswer => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCitations {
    pub documents: Vec<Document>,
    pub warnings: Vec<String>,
}

impl ParsedCitations {
    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }
}

pub fn render_claim_prompt(
    templates: &Templates,
    question: &str,
    answer_so_far: &[String],
    view: &MemoryView,
) -> Result<String> {
    let answer = if answer_so_far.is_empty() {
        String::new()
    } else {
        format!(" {}", answer_so_far.join(" "))
    };
    let documents = format_documents(view);
    templates.render(
        prompts::CLAIM,
        &[("Question", question), ("Document", &documents), ("Answer", &answer)],
    )
}

/// Interpret a raw claim-generator completion.
pub fn interpret_claim(raw: &str, end_marker: &str) -> ClaimKind {
    let trimmed = raw.trim();
    if trimmed.is_empty() || (!end_marker.is_empty() && trimmed == end_marker) {
        return ClaimKind::EndOfAnswer;
    }
    let cleaned = strip_citation_markers(trimmed);
    match split_sentences(&cleaned).into_iter().next() {
        Some(first) if end_marker.is_empty() || first.trim() != end_marker => {
            // a marker glued to the sentence ("... done.<EOS>") is dropped
            let first = if end_marker.is_empty() {
                first
            } else {
                first.replace(end_marker, "").trim().to_string()
            };
            if first.is_empty() {
                ClaimKind::EndOfAnswer
            } else {
                ClaimKind::Claim(first)
            }
        }
        _ => ClaimKind::EndOfAnswer,
    }
}

pub fn next_claim(
    llm: &dyn CompletionBackend,
    templates: &Templates,
    cfg: &EngineConfig,
    question: &str,
    answer_so_far: &[String],
    view: &MemoryView,
) -> Result<ClaimResult> {
    let prompt = render_claim_prompt(templates, question, answer_so_far, view)?;
    let req = CompletionRequest::new(prompt)
        .max_tokens(cfg.claim_max_tokens)
        .temperature(cfg.temperature)
        .stop(&["\n\n"]);
    let resp = llm.complete(&req)?;
    Ok(ClaimResult {
        kind: interpret_claim(&resp.text, &cfg.end_marker),
        raw_completion: resp.text,
    })
}

pub fn render_citation_prompt(
    templates: &Templates,
    claim: &str,
    view: &MemoryView,
    max_citations: usize,
) -> Result<String> {
    if claim.trim().is_empty() {
        return Err(Error::Precondition("cannot cite an empty claim".into()));
    }
    if view.is_empty() {
        return Err(Error::Precondition("cannot cite from an empty memory".into()));
    }
    let documents = format_documents(view);
    let cap = count_word(max_citations);
    templates.render(
        prompts::CITATION,
        &[("Document", &documents), ("Sentence", claim), ("MaxCitations", &cap)],
    )
}

/// Map `[i]` markers through the view. Out-of-range indices are dropped with
/// a warning, repeats keep their first position, and the result is cut to
/// `max_citations`.
pub fn parse_markers(completion: &str, view: &MemoryView, max_citations: usize) -> ParsedCitations {
    let mut out = ParsedCitations::default();
    for idx in citation_markers(completion) {
        match view.get(idx) {
            Some(doc) => {
                if !out.documents.iter().any(|d| d.id == doc.id) {
                    out.documents.push(doc.clone());
                }
            }
            None => out
                .warnings
                .push(format!("citation [{idx}] out of range for {} documents", view.len())),
        }
    }
    if out.documents.len() > max_citations {
        out.warnings.push(format!(
            "{} citations truncated to {max_citations}",
            out.documents.len()
        ));
        out.documents.truncate(max_citations);
    }
    out
}

pub fn generate_citations(
    llm: &dyn CompletionBackend,
    templates: &Templates,
    cfg: &EngineConfig,
    claim: &str,
    view: &MemoryView,
) -> Result<ParsedCitations> {
    let prompt = render_citation_prompt(templates, claim, view, cfg.max_citations)?;
    let req = CompletionRequest::new(prompt)
        .max_tokens(cfg.citation_max_tokens)
        .temperature(cfg.temperature)
        .stop(&["\n"]);
    let resp = llm.complete(&req)?;
    Ok(parse_markers(&resp.text, view, cfg.max_citations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedLlm;

    fn view(n: usize) -> MemoryView {
        MemoryView::from_documents(
            (1..=n)
                .map(|i| Document::new(format!("d{i}"), format!("T{i}"), format!("text {i}")))
                .collect(),
        )
    }

    fn claim_of(llm_text: &str) -> ClaimKind {
        let llm = ScriptedLlm::new([llm_text]);
        next_claim(&llm, &Templates::default(), &EngineConfig::default(), "q", &[], &view(2))
            .unwrap()
            .kind
    }

    #[test]
    fn claim_prompt_lists_documents_and_answer() {
        let t = Templates::default().without_demos();
        let p = render_claim_prompt(&t, "Why coffee?", &[], &view(2)).unwrap();
        assert!(p.contains("Question: Why coffee?"));
        assert!(p.contains("[1] (Title: T1) text 1\n[2] (Title: T2) text 2"));
        assert!(p.ends_with("Answer:"));

        let prior = vec!["First claim.".to_string(), "Second claim.".to_string()];
        let p = render_claim_prompt(&t, "q", &prior, &view(1)).unwrap();
        assert!(p.ends_with("Answer: First claim. Second claim."));

        let p = render_claim_prompt(&t, "q", &[], &MemoryView::default()).unwrap();
        assert!(p.contains("Document:\n\nAnswer:"));
    }

    #[test]
    fn first_sentence_is_the_claim() {
        assert_eq!(
            claim_of("Coffee lowers risk. It also helps mood."),
            ClaimKind::Claim("Coffee lowers risk.".into())
        );
    }

    #[test]
    fn end_of_answer_signals() {
        assert_eq!(claim_of(""), ClaimKind::EndOfAnswer);
        assert_eq!(claim_of("   \n "), ClaimKind::EndOfAnswer);
        assert_eq!(claim_of("<EOS>"), ClaimKind::EndOfAnswer);
        assert_eq!(claim_of(" <EOS> "), ClaimKind::EndOfAnswer);
    }

    #[test]
    fn leaked_markers_are_stripped() {
        assert_eq!(
            claim_of("Coffee lowers risk [1][2]. More."),
            ClaimKind::Claim("Coffee lowers risk.".into())
        );
        assert_eq!(claim_of("[1]"), ClaimKind::EndOfAnswer);
    }

    #[test]
    fn glued_end_marker_is_dropped() {
        assert_eq!(claim_of("Last point.<EOS>"), ClaimKind::Claim("Last point.".into()));
    }

    #[test]
    fn citation_prompt_enumerates_view() {
        let t = Templates::default().without_demos();
        let p = render_citation_prompt(&t, "Claim.", &view(3), 3).unwrap();
        assert!(p.contains("[1] (Title: T1)") && p.contains("[3] (Title: T3)"));
        assert!(p.contains("at most three documents"));
        assert!(p.contains("Sentence: Claim.\nSentence with citation:"));
        let p = render_citation_prompt(&t, "Claim.", &view(1), 3).unwrap();
        assert!(p.contains("[1]") && !p.contains("(Title: T2)"));
        assert!(render_citation_prompt(&t, " ", &view(1), 3).is_err());
        assert!(render_citation_prompt(&t, "c", &MemoryView::default(), 3).is_err());
    }

    #[test]
    fn marker_parsing_rules() {
        let v = view(4);
        assert_eq!(parse_markers("Coffee lowers risk.[1][3]", &v, 3).ids(), vec!["d1", "d3"]);
        let out = parse_markers("x [5]", &v, 3);
        assert!(out.documents.is_empty());
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(parse_markers("x [2][2][1]", &v, 3).ids(), vec!["d2", "d1"]);
        assert!(parse_markers("[0]", &v, 3).documents.is_empty());
    }

    #[test]
    fn generate_citations_composes() {
        let cfg = EngineConfig::default();
        let t = Templates::default();
        let llm = ScriptedLlm::new(["Claim text. [2]", "no markers", "[1][2][3][4]"]);
        assert_eq!(generate_citations(&llm, &t, &cfg, "Claim text.", &view(4)).unwrap().ids(), vec!["d2"]);
        assert!(generate_citations(&llm, &t, &cfg, "Claim text.", &view(4)).unwrap().documents.is_empty());
        assert_eq!(
            generate_citations(&llm, &t, &cfg, "Claim text.", &view(4)).unwrap().ids(),
            vec!["d1", "d2", "d3"]
        );
    }
}
