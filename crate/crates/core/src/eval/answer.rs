//! Answer correctness against gold strings.
//!
//! Predictions and golds are normalized the usual open-domain QA way, in this
//! order: lowercase, delete ASCII punctuation characters, replace the whole
//! words `a`, `an`, `the` with a space, collapse whitespace runs to single
//! spaces and trim. Metrics over several golds take the maximum. An empty
//! gold list scores 0.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::backends::EntailmentJudge;
use crate::error::Result;

static ARTICLES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(a|an|the)\b").unwrap());

pub fn normalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_punct: String = lower.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let no_articles = ARTICLES.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize_answer(text).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn best<F: Fn(&str) -> f64>(golds: &[String], score: F) -> f64 {
    golds.iter().map(|g| score(g)).fold(0.0, f64::max)
}

/// 1 when the normalized prediction equals some normalized gold. An empty
/// prediction never matches.
pub fn exact_match(prediction: &str, golds: &[String]) -> f64 {
    let pred = normalize_answer(prediction);
    if pred.is_empty() {
        return 0.0;
    }
    best(golds, |g| (normalize_answer(g) == pred) as u8 as f64)
}

/// Bag-of-tokens F1. Two empty token lists score 1; one empty list scores 0.
pub fn token_f1(prediction: &str, golds: &[String]) -> f64 {
    let pred = tokens(prediction);
    best(golds, |g| {
        let gold = tokens(g);
        if pred.is_empty() || gold.is_empty() {
            return (pred.is_empty() && gold.is_empty()) as u8 as f64;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &gold {
            *counts.entry(t).or_default() += 1;
        }
        let mut overlap = 0usize;
        for t in &pred {
            if let Some(c) = counts.get_mut(t.as_str()) {
                if *c > 0 {
                    *c -= 1;
                    overlap += 1;
                }
            }
        }
        if overlap == 0 {
            return 0.0;
        }
        let p = overlap as f64 / pred.len() as f64;
        let r = overlap as f64 / gold.len() as f64;
        2.0 * p * r / (p + r)
    })
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (precision and recall weighted equally) over normalized
/// tokens. Scores 0 when either side has no tokens.
pub fn rouge_l(prediction: &str, golds: &[String]) -> f64 {
    let pred = tokens(prediction);
    best(golds, |g| {
        let gold = tokens(g);
        let lcs = lcs_len(&pred, &gold);
        if lcs == 0 {
            return 0.0;
        }
        let p = lcs as f64 / pred.len() as f64;
        let r = lcs as f64 / gold.len() as f64;
        2.0 * p * r / (p + r)
    })
}

/// Fraction of gold sub-claims the prediction entails. The prediction is cut
/// to `budget` characters when given. An empty prediction scores 0 without
/// calling the judge.
pub fn subclaim_recall(
    judge: &dyn EntailmentJudge,
    prediction: &str,
    subclaims: &[String],
    budget: Option<usize>,
) -> Result<f64> {
    if prediction.trim().is_empty() || subclaims.is_empty() {
        return Ok(0.0);
    }
    let premise: String = match budget {
        Some(b) => prediction.chars().take(b).collect(),
        None => prediction.to_string(),
    };
    let mut hits = 0usize;
    let mut counted = 0usize;
    for s in subclaims {
        if s.trim().is_empty() {
            continue;
        }
        counted += 1;
        hits += judge.judge(&premise, s)?.entailed as usize;
    }
    Ok(if counted == 0 { 0.0 } else { hits as f64 / counted as f64 })
}
