//! Comparison systems that answer in a single pass without verification:
//!
//! * `vanilla`: answer with inline `[i]` markers over the top-k documents;
//! * `summ` / `snippet`: condense each of the top-K documents first (a short
//!   summary or an extracted span), drop the ones the model calls irrelevant,
//!   then answer over the condensed texts;
//! * `rerank`: sample several vanilla answers at a higher temperature and
//!   keep the one with the best citation recall.
//!
//! Answers are segmented with the same sentence splitter the engine uses, so
//! citation metrics are comparable across systems. Every unit is marked
//! unverified.

use serde::{Deserialize, Serialize};

use crate::backends::{CallLog, CompletionBackend, CompletionRequest, EntailmentJudge, MeteredJudge, MeteredLlm};
use crate::config::BaselineConfig;
use crate::corpus::Retriever;
use crate::error::{Error, Result};
use crate::eval::citation_recall;
use crate::generation::parse_markers;
use crate::memory::MemoryView;
use crate::prompts::{self, format_documents, Templates};
use crate::response::VerifiedResponse;
use crate::text::{split_sentences, strip_citation_markers};
use crate::trace::{PipelineTrace, TokenUsage};
use crate::types::{AnswerUnit, Document, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSystem {
    Vanilla,
    Summ,
    Snippet,
    Rerank,
}

impl BaselineSystem {
    pub fn name(self) -> &'static str {
        match self {
            BaselineSystem::Vanilla => "vanilla",
            BaselineSystem::Summ => "summ",
            BaselineSystem::Snippet => "snippet",
            BaselineSystem::Rerank => "rerank",
        }
    }
}

/// Rerank candidates with their recall scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub response: VerifiedResponse,
    pub candidates: Vec<Vec<AnswerUnit>>,
    pub recalls: Vec<f64>,
    pub chosen: usize,
}

/// Index of the largest score; the earliest wins ties. Panics on an empty
/// slice.
pub fn select_best(scores: &[f64]) -> usize {
    assert!(!scores.is_empty(), "no candidates to select from");
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Split an answer into units, reading `[i]` markers of each sentence through
/// `view`. Markers are removed from the claim text.
pub fn segment_answer(answer: &str, view: &MemoryView) -> Vec<AnswerUnit> {
    split_sentences(answer)
        .into_iter()
        .filter_map(|sentence| {
            let claim = strip_citation_markers(&sentence).trim().to_string();
            if claim.is_empty() {
                return None;
            }
            let cited = parse_markers(&sentence, view, usize::MAX);
            Some(AnswerUnit::new(claim, cited.ids()).verified(false))
        })
        .collect()
}

/// True for condensed outputs that carry nothing: empty, or the word
/// "irrelevant" in any case, possibly quoted or followed by punctuation.
pub fn is_irrelevant(condensed: &str) -> bool {
    let core = condensed
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c.is_ascii_punctuation() || c.is_whitespace());
    core.is_empty() || core.eq_ignore_ascii_case("irrelevant")
}

#[derive(Clone, Copy)]
pub struct Baselines<'a> {
    pub llm: &'a dyn CompletionBackend,
    pub retriever: &'a dyn Retriever,
    pub templates: &'a Templates,
    pub config: &'a BaselineConfig,
}

impl<'a> Baselines<'a> {
    pub fn new(
        llm: &'a dyn CompletionBackend,
        retriever: &'a dyn Retriever,
        templates: &'a Templates,
        config: &'a BaselineConfig,
    ) -> Self {
        Self {
            llm,
            retriever,
            templates,
            config,
        }
    }

    /// Run `system`; `judge` is only consulted by rerank.
    pub fn run(&self, system: BaselineSystem, judge: &dyn EntailmentJudge, question: &Question) -> Result<VerifiedResponse> {
        match system {
            BaselineSystem::Vanilla => self.vanilla(question),
            BaselineSystem::Summ => self.condensed(question, prompts::SUMMARIZE),
            BaselineSystem::Snippet => self.condensed(question, prompts::SNIPPET),
            BaselineSystem::Rerank => Ok(self.rerank(judge, question)?.response),
        }
    }

    pub fn vanilla(&self, question: &Question) -> Result<VerifiedResponse> {
        self.metered(question, None, |llm, _| {
            let view = self.top(question, self.config.k)?;
            Ok((self.answer(llm, question, &view, 0.0)?, ()))
        })
        .map(|(r, _)| r)
    }

    pub fn summ(&self, question: &Question) -> Result<VerifiedResponse> {
        self.condensed(question, prompts::SUMMARIZE)
    }

    pub fn snippet(&self, question: &Question) -> Result<VerifiedResponse> {
        self.condensed(question, prompts::SNIPPET)
    }

    pub fn rerank(&self, judge: &dyn EntailmentJudge, question: &Question) -> Result<RerankOutcome> {
        let samples = self.config.rerank_samples;
        if samples == 0 {
            return Err(Error::Precondition("rerank needs at least one sample".into()));
        }
        let (response, extra) = self.metered(question, Some(judge), |llm, judge| {
            let judge = judge.expect("rerank is metered with a judge");
            let view = self.top(question, self.config.k)?;
            let mut candidates = Vec::with_capacity(samples);
            let mut recalls = Vec::with_capacity(samples);
            for _ in 0..samples {
                let units = self.answer(llm, question, &view, self.config.rerank_temperature)?;
                recalls.push(citation_recall(judge, view.documents(), &units, None)?);
                candidates.push(units);
            }
            let chosen = select_best(&recalls);
            let units = candidates[chosen].clone();
            Ok((units, (candidates, recalls, chosen)))
        })?;
        let (candidates, recalls, chosen) = extra;
        Ok(RerankOutcome {
            response,
            candidates,
            recalls,
            chosen,
        })
    }

    fn condensed(&self, question: &Question, template: &str) -> Result<VerifiedResponse> {
        self.metered(question, None, |llm, _| {
            let mut kept = Vec::new();
            for doc in self.top(question, self.config.big_k)?.documents() {
                let prompt = self.templates.render(
                    template,
                    &[("Question", &question.text), ("Title", &doc.title), ("Text", &doc.text)],
                )?;
                let req = CompletionRequest::new(prompt)
                    .max_tokens(self.config.condense_max_tokens)
                    .stop(&["\n\n"]);
                let text = llm.complete(&req)?.text;
                if !is_irrelevant(&text) {
                    kept.push(Document::new(doc.id.clone(), doc.title.clone(), text.trim()));
                }
            }
            Ok((self.answer(llm, question, &MemoryView::from_documents(kept), 0.0)?, ()))
        })
        .map(|(r, _)| r)
    }

    fn top(&self, question: &Question, n: usize) -> Result<MemoryView> {
        Ok(MemoryView::from_documents(self.retriever.retrieve_documents(&question.text, n)?))
    }

    fn answer(&self, llm: &dyn CompletionBackend, question: &Question, view: &MemoryView, temperature: f64) -> Result<Vec<AnswerUnit>> {
        let prompt = self.templates.render(
            prompts::VANILLA,
            &[("Question", &question.text), ("Document", &format_documents(view))],
        )?;
        let req = CompletionRequest::new(prompt)
            .max_tokens(self.config.answer_max_tokens)
            .temperature(temperature)
            .stop(&["\n\n"]);
        Ok(segment_answer(&llm.complete(&req)?.text, view))
    }

    /// Run `body` with metered backends and package the units as a response
    /// whose trace holds every backend call.
    fn metered<T, F>(&self, question: &Question, judge: Option<&dyn EntailmentJudge>, body: F) -> Result<(VerifiedResponse, T)>
    where
        F: FnOnce(&dyn CompletionBackend, Option<&dyn EntailmentJudge>) -> Result<(Vec<AnswerUnit>, T)>,
    {
        if question.text.trim().is_empty() {
            return Err(Error::Precondition(format!("question `{}` has empty text", question.id)));
        }
        self.config.validate()?;
        let log = CallLog::new();
        let llm = MeteredLlm::new(self.llm, &log);
        let metered_judge = judge.map(|j| MeteredJudge::new(j, &log));
        let (units, extra) = body(&llm, metered_judge.as_ref().map(|j| j as &dyn EntailmentJudge))?;
        let trace = PipelineTrace {
            events: Vec::new(),
            calls: log.snapshot(),
        };
        let response = VerifiedResponse {
            question_id: question.id.clone(),
            units,
            token_usage: TokenUsage::from_calls(&trace.calls),
            trace: Some(trace),
        };
        Ok((response, extra))
    }
}
