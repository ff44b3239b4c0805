//! Metrics: citation quality under an entailment judge, answer correctness
//! against gold strings, and per-corpus report aggregation.

mod answer;
mod citation;
mod report;

pub use answer::{exact_match, normalize_answer, rouge_l, subclaim_recall, token_f1};
pub use citation::{
    citation_f1, citation_precision, citation_recall, claim_supported, score_citations, CitationScores,
};
pub use report::{
    evaluate, read_gold, EvalCounts, EvalFlag, EvalMeans, EvalOptions, EvalReport, FlagKind, GoldRecord,
    QuestionMetrics, ReportMetadata,
};
