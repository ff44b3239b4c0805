//! The generate / verify / simplify / repair loop.
//!
//! Each [`Engine::step`] takes exactly one branch:
//!
//! 1. the claim generator signals end of answer: finish;
//! 2. the generated citations entail the claim: simplify them, accept, absorb
//!    them into long-term memory, reset the trial counter;
//! 3. otherwise the whole memory entails the claim: simplify the memory view
//!    down to a citation set, accept, absorb, reset;
//! 4. otherwise, if the trial counter exceeds `max_trials`: accept the claim
//!    with its unverified citations (no absorption), reset;
//! 5. otherwise: rebuild short-term memory with the evidence finder and
//!    increment the trial counter.
//!
//! A claim is regenerated, together with its citations, after every refresh.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{CallLog, CompletionBackend, EntailmentJudge, MeteredJudge, MeteredLlm};
use crate::config::EngineConfig;
use crate::corpus::Retriever;
use crate::error::{Error, Result};
use crate::evidence::find_evidence;
use crate::generation::{generate_citations, next_claim, ClaimKind, ParsedCitations};
use crate::memory::MemoryState;
use crate::prompts::Templates;
use crate::response::VerifiedResponse;
use crate::trace::{AcceptRoute, PipelineTrace, TokenUsage, TraceEvent};
use crate::types::{AnswerUnit, Document, Question};
use crate::verification::{simplify, verify_generation, verify_memory};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub memory: MemoryState,
    pub output: Vec<AnswerUnit>,
    /// Trial counter for the claim currently being produced.
    pub t: usize,
    pub finished: bool,
    /// Steps taken so far.
    pub steps: usize,
}

impl PipelineState {
    pub fn new(memory: MemoryState) -> Self {
        Self {
            memory,
            ..Self::default()
        }
    }

    pub fn answer_so_far(&self) -> Vec<String> {
        self.output.iter().map(|u| u.claim.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: PipelineState,
    pub events: Vec<TraceEvent>,
    pub unit: Option<AnswerUnit>,
}

/// A failed run: the error plus whatever was produced before it.
#[derive(Debug, Error)]
#[error("question `{}`: {error}", partial.question_id)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<VerifiedResponse>,
}

/// Shared handles for one or more runs. Cheap to construct; holds no state.
#[derive(Clone, Copy)]
pub struct Engine<'a> {
    pub llm: &'a dyn CompletionBackend,
    pub judge: &'a dyn EntailmentJudge,
    pub retriever: &'a dyn Retriever,
    pub templates: &'a Templates,
    pub config: &'a EngineConfig,
}

fn ids(docs: &[Document]) -> Vec<String> {
    docs.iter().map(|d| d.id.clone()).collect()
}

impl<'a> Engine<'a> {
    pub fn new(
        llm: &'a dyn CompletionBackend,
        judge: &'a dyn EntailmentJudge,
        retriever: &'a dyn Retriever,
        templates: &'a Templates,
        config: &'a EngineConfig,
    ) -> Self {
        Self {
            llm,
            judge,
            retriever,
            templates,
            config,
        }
    }

    pub fn initial_state(&self, question: &str) -> Result<PipelineState> {
        let memory = MemoryState::init(self.retriever, question, self.config.initial_docs)?
            .with_long_term_cap(self.config.long_term_cap);
        Ok(PipelineState::new(memory))
    }

    /// Advance the state machine by one step.
    pub fn step(&self, question: &str, state: &PipelineState) -> Result<Transition> {
        if state.finished {
            return Err(Error::Precondition("pipeline already finished".into()));
        }
        let cfg = self.config;
        let mut next = state.clone();
        let step = state.steps;
        next.steps += 1;
        let mut events = Vec::new();

        let judge_log = CallLog::new();
        let judge = MeteredJudge::new(self.judge, &judge_log);
        let mut judge_calls_since = {
            let mut last = 0;
            move |log: &CallLog| {
                let now = log.judge_calls();
                let delta = now - last;
                last = now;
                delta
            }
        };

        let answer_so_far = state.answer_so_far();
        let view = state.memory.view();
        let claim = next_claim(self.llm, self.templates, cfg, question, &answer_so_far, &view)?;
        let claim = match claim.kind {
            ClaimKind::EndOfAnswer => {
                next.finished = true;
                events.push(TraceEvent::Finished { step });
                return Ok(Transition {
                    state: next,
                    events,
                    unit: None,
                });
            }
            ClaimKind::Claim(text) => text,
        };
        events.push(TraceEvent::ClaimGenerated {
            step,
            claim: claim.clone(),
            t: state.t,
        });

        let cited = if view.is_empty() {
            ParsedCitations {
                documents: Vec::new(),
                warnings: vec!["memory is empty; citation generator skipped".into()],
            }
        } else {
            generate_citations(self.llm, self.templates, cfg, &claim, &view)?
        };
        events.push(TraceEvent::CitationGenerated {
            step,
            doc_ids: cited.ids(),
            warnings: cited.warnings.clone(),
        });

        let gen = verify_generation(&judge, &claim, &cited.documents)?;
        events.push(TraceEvent::GenVerify {
            step,
            passed: gen.passed,
            doc_ids: gen.premise_doc_ids.clone(),
            judge_calls: judge_calls_since(&judge_log),
        });

        let accepted = if gen.passed {
            Some((AcceptRoute::Generation, cited.documents.clone()))
        } else {
            let mem = verify_memory(&judge, &claim, &state.memory)?;
            events.push(TraceEvent::MemVerify {
                step,
                passed: mem.passed,
                doc_ids: mem.premise_doc_ids.clone(),
                judge_calls: judge_calls_since(&judge_log),
            });
            mem.passed
                .then(|| (AcceptRoute::Memory, view.documents().to_vec()))
        };

        if let Some((route, candidates)) = accepted {
            let simplified = simplify(&judge, &claim, &candidates)?;
            events.push(TraceEvent::Simplified {
                step,
                before: ids(&candidates),
                after: ids(&simplified),
                judge_calls: judge_calls_since(&judge_log),
            });
            let absorbed = next.memory.absorb(&simplified);
            let unit = AnswerUnit::new(claim.clone(), ids(&simplified)).verified(true);
            next.output.push(unit.clone());
            next.t = 0;
            events.push(TraceEvent::Accepted {
                step,
                route,
                claim,
                doc_ids: ids(&simplified),
                t_before: state.t,
                t_after: 0,
                absorbed,
            });
            return Ok(Transition {
                state: next,
                events,
                unit: Some(unit),
            });
        }

        if state.t > cfg.max_trials {
            let unit = AnswerUnit::new(claim.clone(), cited.ids()).verified(false);
            next.output.push(unit.clone());
            next.t = 0;
            events.push(TraceEvent::ForcedAccept {
                step,
                claim,
                doc_ids: cited.ids(),
                t_before: state.t,
                t_after: 0,
            });
            return Ok(Transition {
                state: next,
                events,
                unit: Some(unit),
            });
        }

        let evidence = find_evidence(
            self.llm,
            self.retriever,
            self.templates,
            cfg,
            question,
            &answer_so_far,
            &claim,
        )?;
        next.memory.refresh(evidence.documents.clone());
        next.t = state.t + 1;
        events.push(TraceEvent::EvidenceRefreshed {
            step,
            queries: evidence.queries,
            doc_ids: ids(&evidence.documents),
            t_before: state.t,
            t_after: next.t,
        });
        Ok(Transition {
            state: next,
            events,
            unit: None,
        })
    }

    /// Run the loop to the end of the answer. Token usage and every backend
    /// call are recorded in the returned trace.
    pub fn run(&self, question: &Question) -> std::result::Result<VerifiedResponse, RunFailure> {
        let log = CallLog::new();
        let llm = MeteredLlm::new(self.llm, &log);
        let judge = MeteredJudge::new(self.judge, &log);
        let metered = Engine {
            llm: &llm,
            judge: &judge,
            ..*self
        };

        let mut trace = PipelineTrace::default();
        let mut units = Vec::new();
        let outcome = metered.drive(question, &mut trace, &mut units);

        trace.calls = log.snapshot();
        let response = VerifiedResponse {
            question_id: question.id.clone(),
            units,
            token_usage: TokenUsage::from_calls(&trace.calls),
            trace: Some(trace),
        };
        match outcome {
            Ok(()) => Ok(response),
            Err(error) => Err(RunFailure {
                error,
                partial: Box::new(response),
            }),
        }
    }

    fn drive(&self, question: &Question, trace: &mut PipelineTrace, units: &mut Vec<AnswerUnit>) -> Result<()> {
        if question.text.trim().is_empty() {
            return Err(Error::Precondition(format!("question `{}` has empty text", question.id)));
        }
        self.config.validate()?;
        let cap = self.config.step_cap();
        let mut state = self.initial_state(&question.text)?;
        while !state.finished {
            if state.steps >= cap {
                return Err(Error::StepCapExceeded(cap));
            }
            let transition = self.step(&question.text, &state)?;
            trace.events.extend(transition.events);
            units.extend(transition.unit);
            state = transition.state;
        }
        Ok(())
    }
}

impl PipelineTrace {
    /// Number of claim generations spent on each emitted unit, in order.
    pub fn trials_per_unit(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut generated = 0;
        for e in &self.events {
            match e {
                TraceEvent::ClaimGenerated { .. } => generated += 1,
                TraceEvent::Accepted { .. } | TraceEvent::ForcedAccept { .. } => {
                    out.push(generated);
                    generated = 0;
                }
                _ => {}
            }
        }
        out
    }
}
