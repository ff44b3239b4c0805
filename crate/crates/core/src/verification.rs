//! Generation verifier, memory verifier and the leave-one-out citation
//! simplifier. All three reduce to one judge call on a concatenated premise.

use serde::{Deserialize, Serialize};

use crate::backends::EntailmentJudge;
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::types::Document;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub passed: bool,
    pub premise_doc_ids: Vec<String>,
    pub judge_score: f64,
}

impl VerificationOutcome {
    fn failed(ids: Vec<String>) -> Self {
        Self {
            passed: false,
            premise_doc_ids: ids,
            judge_score: 0.0,
        }
    }
}

/// `Title: {title}\n{text}` blocks joined by a blank line, in the given order.
pub fn concat_premise(docs: &[Document]) -> Result<String> {
    concat_premise_within(docs, None)
}

/// As [`concat_premise`], but when the result would exceed `budget`
/// characters every block is cut to its first `budget / docs.len()`
/// characters.
pub fn concat_premise_within(docs: &[Document], budget: Option<usize>) -> Result<String> {
    if docs.is_empty() {
        return Err(Error::Precondition("premise needs at least one document".into()));
    }
    let blocks: Vec<String> = docs
        .iter()
        .map(|d| format!("Title: {}\n{}", d.title, d.text))
        .collect();
    let joined = blocks.join("\n\n");
    match budget {
        Some(budget) if joined.chars().count() > budget => {
            let share = budget / docs.len();
            Ok(blocks
                .iter()
                .map(|b| b.chars().take(share).collect::<String>())
                .collect::<Vec<_>>()
                .join("\n\n"))
        }
        _ => Ok(joined),
    }
}

fn entails(judge: &dyn EntailmentJudge, claim: &str, docs: &[Document]) -> Result<(bool, f64)> {
    if docs.is_empty() {
        return Ok((false, 0.0));
    }
    let v = judge.judge(&concat_premise(docs)?, claim)?;
    Ok((v.entailed, v.score))
}

fn ids(docs: &[Document]) -> Vec<String> {
    docs.iter().map(|d| d.id.clone()).collect()
}

/// Do the generated citations entail the claim? An empty citation list fails
/// without consulting the judge.
pub fn verify_generation(
    judge: &dyn EntailmentJudge,
    claim: &str,
    citations: &[Document],
) -> Result<VerificationOutcome> {
    if citations.is_empty() {
        return Ok(VerificationOutcome::failed(Vec::new()));
    }
    let (passed, judge_score) = entails(judge, claim, citations)?;
    Ok(VerificationOutcome {
        passed,
        premise_doc_ids: ids(citations),
        judge_score,
    })
}

/// Does the merged memory view entail the claim?
pub fn verify_memory(
    judge: &dyn EntailmentJudge,
    claim: &str,
    state: &MemoryState,
) -> Result<VerificationOutcome> {
    let view = state.view();
    if view.is_empty() {
        return Ok(VerificationOutcome::failed(Vec::new()));
    }
    let (passed, judge_score) = entails(judge, claim, view.documents())?;
    Ok(VerificationOutcome {
        passed,
        premise_doc_ids: view.ids(),
        judge_score,
    })
}

/// One forward pass in citation order: each document is tentatively removed
/// and the removal is kept when the remaining set still entails the claim.
/// Removing the last document is never attempted, since an empty premise
/// cannot entail.
///
/// Uses `citations.len()` judge calls at most. With a judge that is monotone
/// in the premise the result is single-removal minimal and idempotent.
pub fn simplify(judge: &dyn EntailmentJudge, claim: &str, citations: &[Document]) -> Result<Vec<Document>> {
    let mut kept: Vec<Document> = citations.to_vec();
    for doc in citations {
        if kept.len() <= 1 {
            break;
        }
        let remainder: Vec<Document> = kept.iter().filter(|d| d.id != doc.id).cloned().collect();
        if entails(judge, claim, &remainder)?.0 {
            kept = remainder;
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{CallLog, ContainmentJudge, FnJudge, MeteredJudge};

    fn d(id: &str, text: &str) -> Document {
        Document::new(id, id.to_uppercase(), text)
    }

    #[test]
    fn premise_format() {
        assert_eq!(concat_premise(&[d("a", "alpha")]).unwrap(), "Title: A\nalpha");
        assert_eq!(
            concat_premise(&[d("a", "alpha"), d("b", "beta")]).unwrap(),
            "Title: A\nalpha\n\nTitle: B\nbeta"
        );
        assert!(concat_premise(&[]).is_err());
    }

    #[test]
    fn premise_budget_truncates_each_block() {
        let docs = [d("a", "aaaaaaaaaa"), d("b", "bbbbbbbbbb")];
        let p = concat_premise_within(&docs, Some(22)).unwrap();
        assert_eq!(p, "Title: A\naa\n\nTitle: B\nbb");
        assert_eq!(concat_premise_within(&docs, Some(1000)).unwrap(), concat_premise(&docs).unwrap());
    }

    #[test]
    fn generation_verifier() {
        let j = ContainmentJudge::new();
        let out = verify_generation(&j, "coffee boosts mood", &[d("a", "coffee boosts mood daily")]).unwrap();
        assert!(out.passed);
        assert_eq!(out.premise_doc_ids, vec!["a"]);
        assert!(!verify_generation(&j, "coffee boosts mood", &[d("t", "tea history")]).unwrap().passed);
    }

    #[test]
    fn empty_citations_skip_the_judge() {
        let log = CallLog::new();
        let inner = ContainmentJudge::new();
        let j = MeteredJudge::new(&inner, &log);
        let out = verify_generation(&j, "claim", &[]).unwrap();
        assert!(!out.passed);
        assert_eq!(log.judge_calls(), 0);
    }

    #[test]
    fn memory_verifier_uses_short_term() {
        let j = ContainmentJudge::new();
        let state = MemoryState::new(vec![d("l", "tea history")], vec![d("s", "coffee boosts mood")]);
        assert!(verify_memory(&j, "coffee boosts mood", &state).unwrap().passed);
        assert!(!verify_memory(&j, "coffee", &MemoryState::default()).unwrap().passed);
    }

    #[test]
    fn memory_verifier_combines_documents() {
        let j = ContainmentJudge::new();
        let state = MemoryState::new(vec![d("l", "coffee boosts")], vec![d("s", "mood swings")]);
        // neither document alone covers {coffee, boosts, mood}
        assert!(!j.judge(&concat_premise(&[d("l", "coffee boosts")]).unwrap(), "coffee boosts mood").unwrap().entailed);
        assert!(!j.judge(&concat_premise(&[d("s", "mood swings")]).unwrap(), "coffee boosts mood").unwrap().entailed);
        assert!(verify_memory(&j, "coffee boosts mood", &state).unwrap().passed);
    }

    #[test]
    fn simplify_drops_redundant() {
        let j = ContainmentJudge::new();
        let out = simplify(&j, "coffee mood", &[d("a", "coffee mood"), d("b", "coffee")]).unwrap();
        assert_eq!(ids(&out), vec!["a"]);
    }

    #[test]
    fn simplify_keeps_jointly_needed() {
        let j = ContainmentJudge::new();
        let out = simplify(&j, "coffee mood", &[d("a", "coffee"), d("b", "mood")]).unwrap();
        assert_eq!(ids(&out), vec!["a", "b"]);
    }

    #[test]
    fn simplify_sole_citation_survives() {
        let log = CallLog::new();
        let inner = FnJudge::new(|_, _| true);
        let j = MeteredJudge::new(&inner, &log);
        let out = simplify(&j, "c", &[d("a", "x")]).unwrap();
        assert_eq!(ids(&out), vec!["a"]);
        assert_eq!(log.judge_calls(), 0);
        assert!(simplify(&j, "c", &[]).unwrap().is_empty());
    }

    #[test]
    fn simplify_removal_is_sticky() {
        // a and b each alone suffice; the pass removes a first, then keeps b
        let j = ContainmentJudge::new();
        let out = simplify(&j, "coffee", &[d("a", "coffee"), d("b", "coffee"), d("c", "tea")]).unwrap();
        assert_eq!(ids(&out), vec!["b"]);
    }
}
