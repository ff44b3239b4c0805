//! Citation recall and precision.
//!
//! A claim has recall 1 when it cites at least one document and the
//! concatenation of its cited documents entails it. A citation scores 1 for
//! precision when its claim has recall 1 and the citation is not irrelevant.
//! It is irrelevant when both
//!
//! * (a) the document alone does not entail the claim, and
//! * (b) the remaining citations of the claim still entail it.
//!
//! An empty remainder never entails, so a sole citation on a supported claim
//! always scores 1. Response scores are means over claims (recall) and over
//! citations (precision). A response with no claims, or no citations, scores
//! 0 on the corresponding metric.

use serde::{Deserialize, Serialize};

use crate::backends::EntailmentJudge;
use crate::error::{Error, Result};
use crate::types::{AnswerUnit, Document, DocumentLookup};
use crate::verification::concat_premise_within;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CitationScores {
    /// Per claim, in response order.
    pub claim_recall: Vec<bool>,
    /// Per claim, one entry per listed citation.
    pub citation_precision: Vec<Vec<bool>>,
}

impl CitationScores {
    pub fn claims(&self) -> usize {
        self.claim_recall.len()
    }

    pub fn citations(&self) -> usize {
        self.citation_precision.iter().map(Vec::len).sum()
    }

    pub fn recall(&self) -> f64 {
        mean(self.claim_recall.iter().copied())
    }

    pub fn precision(&self) -> f64 {
        mean(self.citation_precision.iter().flatten().copied())
    }
}

fn mean(values: impl Iterator<Item = bool>) -> f64 {
    let (hits, n) = values.fold((0usize, 0usize), |(h, n), v| (h + v as usize, n + 1));
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

fn resolve<'d, L: DocumentLookup + ?Sized>(lookup: &'d L, unit: &AnswerUnit) -> Result<Vec<&'d Document>> {
    unit.citations
        .iter()
        .map(|id| {
            lookup
                .document(id)
                .ok_or_else(|| Error::InvalidResponse(format!("citation `{id}` does not resolve to a document")))
        })
        .collect()
}

fn entails(judge: &dyn EntailmentJudge, claim: &str, docs: &[&Document], budget: Option<usize>) -> Result<bool> {
    if docs.is_empty() || claim.trim().is_empty() {
        return Ok(false);
    }
    let owned: Vec<Document> = docs.iter().map(|d| (*d).clone()).collect();
    let premise = concat_premise_within(&owned, budget)?;
    Ok(judge.judge(&premise, claim)?.entailed)
}

/// Recall for one claim: at most one judge call.
pub fn claim_supported<L: DocumentLookup + ?Sized>(
    judge: &dyn EntailmentJudge,
    lookup: &L,
    unit: &AnswerUnit,
    budget: Option<usize>,
) -> Result<bool> {
    let docs = resolve(lookup, unit)?;
    entails(judge, &unit.claim, &docs, budget)
}

/// Recall and precision for every claim and citation of a response. Uses at
/// most one judge call per claim plus two per citation.
pub fn score_citations<L: DocumentLookup + ?Sized>(
    judge: &dyn EntailmentJudge,
    lookup: &L,
    units: &[AnswerUnit],
    budget: Option<usize>,
) -> Result<CitationScores> {
    let mut scores = CitationScores::default();
    for unit in units {
        let docs = resolve(lookup, unit)?;
        let supported = entails(judge, &unit.claim, &docs, budget)?;
        let mut per_citation = Vec::with_capacity(docs.len());
        for i in 0..docs.len() {
            if !supported {
                per_citation.push(false);
                continue;
            }
            if docs.len() == 1 || entails(judge, &unit.claim, &docs[i..=i], budget)? {
                per_citation.push(true);
                continue;
            }
            let rest: Vec<&Document> = docs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, d)| *d)
                .collect();
            per_citation.push(!entails(judge, &unit.claim, &rest, budget)?);
        }
        scores.claim_recall.push(supported);
        scores.citation_precision.push(per_citation);
    }
    Ok(scores)
}

pub fn citation_recall<L: DocumentLookup + ?Sized>(
    judge: &dyn EntailmentJudge,
    lookup: &L,
    units: &[AnswerUnit],
    budget: Option<usize>,
) -> Result<f64> {
    let mut hits = 0usize;
    for unit in units {
        hits += claim_supported(judge, lookup, unit, budget)? as usize;
    }
    Ok(if units.is_empty() {
        0.0
    } else {
        hits as f64 / units.len() as f64
    })
}

pub fn citation_precision<L: DocumentLookup + ?Sized>(
    judge: &dyn EntailmentJudge,
    lookup: &L,
    units: &[AnswerUnit],
    budget: Option<usize>,
) -> Result<f64> {
    Ok(score_citations(judge, lookup, units, budget)?.precision())
}

/// Harmonic mean of recall and precision; 0 when both are 0. Works on either
/// the unit or the percent scale as long as both inputs share it.
pub fn citation_f1(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}
