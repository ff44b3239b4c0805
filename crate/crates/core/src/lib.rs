//! Verifiable text generation: answers are produced one claim at a time,
//! each claim cites corpus documents, and an entailment cascade over an
//! evolving long/short-term document memory decides whether the citations
//! hold up before the claim is kept.

pub mod backends;
pub mod baselines;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod evidence;
pub mod generation;
pub mod memory;
pub mod pipeline;
pub mod prompts;
pub mod response;
pub mod runner;
pub mod text;
pub mod trace;
pub mod types;
pub mod verification;

pub use error::{BackendError, Error, Result};
pub use types::{AnswerUnit, Document, DocumentLookup, Question};
