//! Audit records for a generation run.
//!
//! Event order follows the state machine. One deliberate difference from the
//! textbook loop: the end-of-answer check happens before the citation
//! generator is called, so a `Finished` event is never preceded by a
//! `CitationGenerated` event for the end token.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Completion,
    Judge,
}

/// One backend call and its token cost. Judge calls carry zero tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: CallKind,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptRoute {
    /// The generated citations entailed the claim.
    Generation,
    /// Only the full memory entailed the claim.
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    ClaimGenerated {
        step: usize,
        claim: String,
        t: usize,
    },
    CitationGenerated {
        step: usize,
        doc_ids: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    GenVerify {
        step: usize,
        passed: bool,
        doc_ids: Vec<String>,
        judge_calls: u64,
    },
    MemVerify {
        step: usize,
        passed: bool,
        doc_ids: Vec<String>,
        judge_calls: u64,
    },
    Simplified {
        step: usize,
        before: Vec<String>,
        after: Vec<String>,
        judge_calls: u64,
    },
    Accepted {
        step: usize,
        route: AcceptRoute,
        claim: String,
        doc_ids: Vec<String>,
        t_before: usize,
        t_after: usize,
        /// Ids newly added to long-term memory.
        absorbed: Vec<String>,
    },
    ForcedAccept {
        step: usize,
        claim: String,
        doc_ids: Vec<String>,
        t_before: usize,
        t_after: usize,
    },
    EvidenceRefreshed {
        step: usize,
        queries: Vec<String>,
        doc_ids: Vec<String>,
        t_before: usize,
        t_after: usize,
    },
    Finished {
        step: usize,
    },
}

impl TraceEvent {
    pub fn step(&self) -> usize {
        match self {
            TraceEvent::ClaimGenerated { step, .. }
            | TraceEvent::CitationGenerated { step, .. }
            | TraceEvent::GenVerify { step, .. }
            | TraceEvent::MemVerify { step, .. }
            | TraceEvent::Simplified { step, .. }
            | TraceEvent::Accepted { step, .. }
            | TraceEvent::ForcedAccept { step, .. }
            | TraceEvent::EvidenceRefreshed { step, .. }
            | TraceEvent::Finished { step } => *step,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TraceEvent::ClaimGenerated { .. } => "claim_generated",
            TraceEvent::CitationGenerated { .. } => "citation_generated",
            TraceEvent::GenVerify { .. } => "gen_verify",
            TraceEvent::MemVerify { .. } => "mem_verify",
            TraceEvent::Simplified { .. } => "simplified",
            TraceEvent::Accepted { .. } => "accepted",
            TraceEvent::ForcedAccept { .. } => "forced_accept",
            TraceEvent::EvidenceRefreshed { .. } => "evidence_refreshed",
            TraceEvent::Finished { .. } => "finished",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub events: Vec<TraceEvent>,
    pub calls: Vec<CallRecord>,
}

impl PipelineTrace {
    pub fn count(&self, name: &str) -> usize {
        self.events.iter().filter(|e| e.name() == name).count()
    }

    pub fn usage(&self) -> TokenUsage {
        TokenUsage::from_calls(&self.calls)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub completion_calls: u64,
    pub judge_calls: u64,
}

impl TokenUsage {
    pub fn from_calls(calls: &[CallRecord]) -> Self {
        calls.iter().fold(Self::default(), |mut acc, call| {
            acc.prompt_tokens += call.prompt_tokens;
            acc.completion_tokens += call.completion_tokens;
            match call.kind {
                CallKind::Completion => acc.completion_calls += 1,
                CallKind::Judge => acc.judge_calls += 1,
            }
            acc
        })
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}
