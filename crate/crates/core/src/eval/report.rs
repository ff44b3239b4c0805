use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::{exact_match, rouge_l, subclaim_recall, token_f1};
use super::citation::{citation_f1, score_citations};
use crate::backends::{CallLog, EntailmentJudge, MeteredJudge};
use crate::error::{Error, Result};
use crate::response::VerifiedResponse;
use crate::types::DocumentLookup;

/// Reference answers for one question. Records from a question file load
/// as-is; `text` and other fields are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    #[serde(default, alias = "answers")]
    pub gold: Vec<String>,
    #[serde(default)]
    pub subclaims: Vec<String>,
}

pub fn read_gold<R: BufRead>(input: R) -> Result<HashMap<String, GoldRecord>> {
    let mut out = HashMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GoldRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: format!("malformed gold record: {e}"),
        })?;
        if out.contains_key(&rec.id) {
            return Err(Error::DuplicateId { line: n + 1, id: rec.id });
        }
        out.insert(rec.id.clone(), rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub premise_char_budget: Option<usize>,
    /// Label for the report row.
    pub system: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// No claims; citation metrics set to 0.
    EmptyResponse,
    /// Claims but no citations; precision set to 0.
    NoCitations,
    /// Golds were supplied for other questions but not this one.
    MissingGold,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvalFlag {
    pub question_id: String,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMetrics {
    pub citation_recall: f64,
    pub citation_precision: f64,
    pub citation_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_match: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subclaim_recall: Option<f64>,
    pub claims: usize,
    pub citations: usize,
    pub unverified_claims: usize,
}

/// Arithmetic means over questions. Correctness means cover only questions
/// that have golds. `citation_f1` is the harmonic mean of the two citation
/// means, the way corpus-level F1 is usually reported.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMeans {
    pub citation_recall: f64,
    pub citation_precision: f64,
    pub citation_f1: f64,
    pub exact_match: Option<f64>,
    pub token_f1: Option<f64>,
    pub rouge_l: Option<f64>,
    pub subclaim_recall: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub questions: usize,
    pub claims: usize,
    pub citations: usize,
    pub judge_calls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub system: Option<String>,
    pub judge: String,
    pub premise_char_budget: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub means: EvalMeans,
    pub counts: EvalCounts,
    pub flags: Vec<EvalFlag>,
    pub questions: BTreeMap<String, QuestionMetrics>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", v * 100.0))
}

/// Score every response. Questions are evaluated in parallel; the report is
/// ordered by question id and does not depend on scheduling.
pub fn evaluate<L: DocumentLookup + Sync + ?Sized>(
    judge: &dyn EntailmentJudge,
    lookup: &L,
    responses: &[VerifiedResponse],
    golds: &HashMap<String, GoldRecord>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let mut seen = HashSet::new();
    for r in responses {
        if !seen.insert(r.question_id.as_str()) {
            return Err(Error::InvalidResponse(format!("question `{}` appears twice", r.question_id)));
        }
    }

    let log = CallLog::new();
    let metered = MeteredJudge::new(judge, &log);
    let budget = options.premise_char_budget;
    let scored: Vec<(String, QuestionMetrics, Vec<FlagKind>)> = responses
        .par_iter()
        .map(|resp| {
            let scores = score_citations(&metered, lookup, &resp.units, budget)?;
            let (recall, precision) = (scores.recall(), scores.precision());
            let answer = resp.answer_text();
            let gold = golds.get(&resp.question_id);
            let answers = gold.map(|g| g.gold.as_slice()).filter(|g| !g.is_empty());
            let subclaims = gold.map(|g| g.subclaims.as_slice()).filter(|s| !s.is_empty());
            let mut flags = Vec::new();
            if resp.units.is_empty() {
                flags.push(FlagKind::EmptyResponse);
            } else if scores.citations() == 0 {
                flags.push(FlagKind::NoCitations);
            }
            if !golds.is_empty() && gold.is_none() {
                flags.push(FlagKind::MissingGold);
            }
            let metrics = QuestionMetrics {
                citation_recall: recall,
                citation_precision: precision,
                citation_f1: citation_f1(recall, precision),
                exact_match: answers.map(|g| exact_match(&answer, g)),
                token_f1: answers.map(|g| token_f1(&answer, g)),
                rouge_l: answers.map(|g| rouge_l(&answer, g)),
                subclaim_recall: subclaims
                    .map(|s| subclaim_recall(&metered, &answer, s, budget))
                    .transpose()?,
                claims: scores.claims(),
                citations: scores.citations(),
                unverified_claims: resp.units.iter().filter(|u| !u.verified).count(),
            };
            Ok((resp.question_id.clone(), metrics, flags))
        })
        .collect::<Result<_>>()?;

    let mut report = EvalReport {
        metadata: ReportMetadata {
            system: options.system.clone(),
            judge: judge.name(),
            premise_char_budget: budget,
        },
        ..EvalReport::default()
    };
    for (id, metrics, flags) in scored {
        report
            .flags
            .extend(flags.into_iter().map(|kind| EvalFlag { question_id: id.clone(), kind }));
        report.questions.insert(id, metrics);
    }
    report.flags.sort();

    let qs = || report.questions.values();
    let recall = mean_of(qs().map(|m| m.citation_recall)).unwrap_or(0.0);
    let precision = mean_of(qs().map(|m| m.citation_precision)).unwrap_or(0.0);
    report.means = EvalMeans {
        citation_recall: recall,
        citation_precision: precision,
        citation_f1: citation_f1(recall, precision),
        exact_match: mean_of(qs().filter_map(|m| m.exact_match)),
        token_f1: mean_of(qs().filter_map(|m| m.token_f1)),
        rouge_l: mean_of(qs().filter_map(|m| m.rouge_l)),
        subclaim_recall: mean_of(qs().filter_map(|m| m.subclaim_recall)),
    };
    report.counts = EvalCounts {
        questions: report.questions.len(),
        claims: qs().map(|m| m.claims).sum(),
        citations: qs().map(|m| m.citations).sum(),
        judge_calls: log.judge_calls(),
    };
    Ok(report)
}

impl EvalReport {
    /// Plain-text table: correctness columns, then citation columns, values
    /// as percentages with two decimals.
    pub fn render(&self) -> String {
        let m = &self.means;
        let c = &self.counts;
        let name = self.metadata.system.as_deref().unwrap_or("system");
        let width = name.chars().count().max(6);
        let mut out = String::new();
        let _ = writeln!(out, "judge: {}", self.metadata.judge);
        let _ = writeln!(
            out,
            "premise budget: {}",
            self.metadata
                .premise_char_budget
                .map_or_else(|| "none".to_string(), |b| format!("{b} chars"))
        );
        let _ = writeln!(
            out,
            "questions: {}  claims: {}  citations: {}  judge calls: {}",
            c.questions, c.claims, c.citations, c.judge_calls
        );
        out.push('\n');
        let row = |label: &str, cells: [String; 7]| {
            format!(
                "{label:<width$} | {:>7} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}\n",
                cells[0], cells[1], cells[2], cells[3], cells[4], cells[5], cells[6]
            )
        };
        let _ = writeln!(out, "{:<width$} | {:<31} | Citation", "", "Correct");
        out.push_str(&row("", ["EM", "F1", "ROUGE-L", "Claim", "Rec", "Prec", "F1"].map(String::from)));
        out.push_str(&row(
            name,
            [
                pct(m.exact_match),
                pct(m.token_f1),
                pct(m.rouge_l),
                pct(m.subclaim_recall),
                pct(Some(m.citation_recall)),
                pct(Some(m.citation_precision)),
                pct(Some(m.citation_f1)),
            ],
        ));
        if !self.flags.is_empty() {
            out.push('\n');
            for f in &self.flags {
                let kind = match f.kind {
                    FlagKind::EmptyResponse => "empty response",
                    FlagKind::NoCitations => "no citations",
                    FlagKind::MissingGold => "missing gold",
                };
                let _ = writeln!(out, "flag: {} ({kind})", f.question_id);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ContainmentJudge;
    use crate::types::{AnswerUnit, Document};

    fn docs() -> Vec<Document> {
        vec![Document::new("a", "", "paris capital france"), Document::new("b", "", "tea")]
    }

    fn resp(id: &str, units: Vec<AnswerUnit>) -> VerifiedResponse {
        VerifiedResponse::new(id, units)
    }

    #[test]
    fn aggregates_and_flags() {
        let responses = vec![
            resp("q1", vec![AnswerUnit::new("Paris capital.", vec!["a".into()])]),
            resp("q2", vec![AnswerUnit::new("Paris.", vec![])]),
            resp("q3", vec![]),
        ];
        let golds = read_gold("{\"id\":\"q1\",\"gold\":[\"Paris capital\"]}\n{\"id\":\"q2\",\"text\":\"x\",\"answers\":[\"Lyon\"]}\n".as_bytes()).unwrap();
        let report = evaluate(&ContainmentJudge::new(), &docs()[..], &responses, &golds, &EvalOptions::default()).unwrap();
        assert_eq!(report.counts.questions, 3);
        assert_eq!(report.counts.claims, 2);
        assert_eq!(report.counts.citations, 1);
        assert!((report.means.citation_recall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.means.exact_match, Some(0.5));
        let kinds: Vec<_> = report.flags.iter().map(|f| (f.question_id.as_str(), f.kind)).collect();
        assert_eq!(
            kinds,
            vec![("q2", FlagKind::NoCitations), ("q3", FlagKind::EmptyResponse), ("q3", FlagKind::MissingGold)]
        );
        let text = report.render();
        assert!(text.contains("Correct"));
        assert!(text.contains("33.33"));
    }

    #[test]
    fn duplicate_question_rejected() {
        let responses = vec![resp("q", vec![]), resp("q", vec![])];
        assert!(evaluate(&ContainmentJudge::new(), &docs()[..], &responses, &HashMap::new(), &EvalOptions::default()).is_err());
    }
}
