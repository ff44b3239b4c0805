//! The engine's output record, its validation, and rendering with
//! display-order citation numbers.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{PipelineTrace, TokenUsage};
use crate::types::{AnswerUnit, DocumentLookup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedResponse {
    pub question_id: String,
    pub units: Vec<AnswerUnit>,
    #[serde(default)]
    pub token_usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PipelineTrace>,
}

impl VerifiedResponse {
    pub fn new(question_id: impl Into<String>, units: Vec<AnswerUnit>) -> Self {
        Self {
            question_id: question_id.into(),
            units,
            token_usage: TokenUsage::default(),
            trace: None,
        }
    }

    /// Claims joined by single spaces, without citation markers.
    pub fn answer_text(&self) -> String {
        self.units
            .iter()
            .map(|u| u.claim.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn citation_count(&self) -> usize {
        self.units.iter().map(|u| u.citations.len()).sum()
    }

    pub fn without_trace(mut self) -> Self {
        self.trace = None;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dangling: BTreeSet<String>,
    /// (unit index, duplicated id)
    pub duplicates: Vec<(usize, String)>,
    pub empty_claims: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.dangling.is_empty() && self.duplicates.is_empty() && self.empty_claims.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.dangling.is_empty() {
            let ids: Vec<_> = self.dangling.iter().map(String::as_str).collect();
            parts.push(format!("dangling citations: {}", ids.join(", ")));
        }
        for (unit, id) in &self.duplicates {
            parts.push(format!("unit {unit} cites {id} more than once"));
        }
        for unit in &self.empty_claims {
            parts.push(format!("unit {unit} has an empty claim"));
        }
        parts.join("; ")
    }
}

pub fn validate_response(resp: &VerifiedResponse, universe: &impl DocumentLookup) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, unit) in resp.units.iter().enumerate() {
        if unit.claim.trim().is_empty() {
            report.empty_claims.push(i);
        }
        let mut seen = BTreeSet::new();
        for id in &unit.citations {
            if !seen.insert(id.as_str()) {
                report.duplicates.push((i, id.clone()));
            }
            if !universe.contains(id) {
                report.dangling.insert(id.clone());
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub index: usize,
    pub id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedResponse {
    pub text: String,
    pub references: Vec<Reference>,
}

impl RenderedResponse {
    /// Text followed by a numbered reference list.
    pub fn to_markdown(&self) -> String {
        let mut out = self.text.clone();
        if !self.references.is_empty() {
            out.push_str("\n\n");
            for r in &self.references {
                out.push_str(&format!("[{}] {} ({})\n", r.index, r.title, r.id));
            }
        }
        out
    }
}

/// Number each distinct cited document by first appearance and render the
/// claims with bracketed indices in front of the closing punctuation.
pub fn renumber_citations(
    resp: &VerifiedResponse,
    universe: &impl DocumentLookup,
) -> Result<RenderedResponse> {
    let report = validate_response(resp, universe);
    if !report.is_valid() {
        return Err(Error::InvalidResponse(report.describe()));
    }

    let mut index_of: HashMap<&str, usize> = HashMap::new();
    let mut references = Vec::new();
    let mut rendered = Vec::with_capacity(resp.units.len());
    for unit in &resp.units {
        let mut markers = String::new();
        for id in &unit.citations {
            let next = index_of.len() + 1;
            let idx = *index_of.entry(id.as_str()).or_insert_with(|| {
                let title = universe.document(id).map(|d| d.title.clone()).unwrap_or_default();
                references.push(Reference {
                    index: next,
                    id: id.clone(),
                    title,
                });
                next
            });
            markers.push_str(&format!("[{idx}]"));
        }
        rendered.push(attach_markers(unit.claim.trim(), &markers));
    }
    Ok(RenderedResponse {
        text: rendered.join(" "),
        references,
    })
}

fn attach_markers(claim: &str, markers: &str) -> String {
    if markers.is_empty() {
        return claim.to_string();
    }
    let body = claim.trim_end_matches(['.', '!', '?']);
    let tail = &claim[body.len()..];
    format!("{body}{markers}{tail}")
}

pub fn write_responses<W: Write>(out: &mut W, responses: &[VerifiedResponse]) -> Result<()> {
    for r in responses {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_responses<R: BufRead>(input: R) -> Result<Vec<VerifiedResponse>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(resp);
    }
    Ok(out)
}
