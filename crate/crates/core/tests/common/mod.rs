#![allow(dead_code)]

use std::collections::HashSet;

use attest_core::backends::{ContainmentJudge, EntailmentJudge};
use attest_core::types::{AnswerUnit, Document};

/// Which template produced a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Claim,
    Citation,
    Query,
    Vanilla,
    Condense,
}

pub fn prompt_kind(prompt: &str) -> PromptKind {
    if prompt.ends_with("Sentence with citation:") {
        PromptKind::Citation
    } else if prompt.ends_with("Generated questions:") {
        PromptKind::Query
    } else if prompt.ends_with("Summary:") || prompt.ends_with("Extracted span:") {
        PromptKind::Condense
    } else if prompt.starts_with("Instruction: Write a high-quality answer") {
        PromptKind::Vanilla
    } else {
        PromptKind::Claim
    }
}

/// `(display index, text)` for every numbered document of the final
/// document block.
pub fn listed_documents(prompt: &str) -> Vec<(usize, String)> {
    let block = prompt.rsplit("Document:\n").next().unwrap_or("");
    block
        .lines()
        .take_while(|l| l.starts_with('['))
        .filter_map(|l| {
            let close = l.find(']')?;
            let idx = l[1..close].parse().ok()?;
            let text = l.split_once(") ").map(|(_, t)| t.to_string()).unwrap_or_default();
            Some((idx, text))
        })
        .collect()
}

/// Display index of the first listed document whose text contains `needle`.
pub fn index_of(prompt: &str, needle: &str) -> Option<usize> {
    listed_documents(prompt)
        .into_iter()
        .find(|(_, t)| t.contains(needle))
        .map(|(i, _)| i)
}

/// Text after the final `Answer:` of a claim prompt.
pub fn answer_so_far(prompt: &str) -> String {
    prompt.rsplit("Answer:").next().unwrap_or("").trim().to_string()
}

/// The sentence of a citation prompt.
pub fn cited_sentence(prompt: &str) -> String {
    prompt
        .rsplit("Sentence: ")
        .next()
        .and_then(|s| s.split('\n').next())
        .unwrap_or("")
        .to_string()
}

/// The claim of a query prompt.
pub fn query_claim(prompt: &str) -> String {
    prompt
        .rsplit("The claim is: ")
        .next()
        .and_then(|s| s.split(".\n").next())
        .map(|s| format!("{s}."))
        .unwrap_or_default()
}

const FILLER: [&str; 12] = [
    "granite", "harbor", "lantern", "meadow", "orchard", "pebble", "quarry", "saddle", "thicket", "valley",
    "willow", "yarrow",
];

/// A corpus of `n` filler documents `f00`, `f01`, ... sharing no words with
/// each other beyond the filler vocabulary, plus the given documents.
pub fn synthetic_corpus(n: usize, extra: &[Document]) -> Vec<Document> {
    let mut docs: Vec<Document> = (0..n)
        .map(|i| {
            let a = FILLER[i % FILLER.len()];
            let b = FILLER[(i / FILLER.len() + 3) % FILLER.len()];
            Document::new(format!("f{i:02}"), format!("Filler {i}"), format!("The {a} near the {b} number{i}."))
        })
        .collect();
    docs.extend(extra.iter().cloned());
    docs
}

/// Containment verdict on an explicitly built premise: documents as
/// `Title: t\ntext` blocks joined by a blank line.
pub fn oracle_entails(claim: &str, docs: &[&Document]) -> bool {
    if docs.is_empty() {
        return false;
    }
    let premise = docs
        .iter()
        .map(|d| format!("Title: {}\n{}", d.title, d.text))
        .collect::<Vec<_>>()
        .join("\n\n");
    ContainmentJudge::new().judge(&premise, claim).map(|v| v.entailed).unwrap_or(false)
}

fn lookup<'a>(corpus: &'a [Document], id: &str) -> &'a Document {
    corpus.iter().find(|d| d.id == id).expect("citation resolves")
}

/// Recall straight from the definition.
pub fn brute_recall(corpus: &[Document], units: &[AnswerUnit]) -> f64 {
    if units.is_empty() {
        return 0.0;
    }
    let hits = units
        .iter()
        .filter(|u| {
            let docs: Vec<&Document> = u.citations.iter().map(|c| lookup(corpus, c)).collect();
            !docs.is_empty() && oracle_entails(&u.claim, &docs)
        })
        .count();
    hits as f64 / units.len() as f64
}

/// Precision straight from the definition: every (claim, citation) pair
/// evaluates both conditions in full, with no shortcuts.
pub fn brute_precision(corpus: &[Document], units: &[AnswerUnit]) -> f64 {
    let mut total = 0usize;
    let mut good = 0usize;
    for u in units {
        let docs: Vec<&Document> = u.citations.iter().map(|c| lookup(corpus, c)).collect();
        let recall_one = !docs.is_empty() && oracle_entails(&u.claim, &docs);
        for i in 0..docs.len() {
            total += 1;
            let alone_fails = !oracle_entails(&u.claim, &[docs[i]]);
            let rest: Vec<&Document> = docs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, d)| *d)
                .collect();
            let rest_supports = oracle_entails(&u.claim, &rest);
            let irrelevant = alone_fails && rest_supports;
            if recall_one && !irrelevant {
                good += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        good as f64 / total as f64
    }
}

pub fn ids(docs: &[Document]) -> Vec<String> {
    docs.iter().map(|d| d.id.clone()).collect()
}

pub fn id_set(docs: &[Document]) -> HashSet<String> {
    docs.iter().map(|d| d.id.clone()).collect()
}

/// Whitespace token count, the unit the scripted backend reports.
pub fn ws_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub mod scenarios {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex};

    use attest_core::backends::FnLlm;
    use attest_core::config::EngineConfig;
    use attest_core::types::{Document, Question};

    use super::{answer_so_far, cited_sentence, index_of, prompt_kind, query_claim, synthetic_corpus, PromptKind};

    /// Every (prompt, completion) pair a router produced.
    pub type Transcript = Arc<Mutex<Vec<(String, String)>>>;

    fn count_done(prompt: &str, claims: &[&str]) -> usize {
        let answer = answer_so_far(prompt);
        claims.iter().filter(|c| answer.contains(**c)).count()
    }

    pub const RIVER_CLAIMS: [&str; 3] = [
        "The zorblax river flows through velmora.",
        "Silver eels live in the zorblax river.",
        "The velmora delta freezes every winter.",
    ];

    /// 45 filler documents plus five about a fictional river. The question
    /// retrieves the four river documents; the delta document is only
    /// reachable through a generated query.
    pub fn river_world() -> (Vec<Document>, Question, EngineConfig) {
        let topical = [
            Document::new("z1", "Zorblax", "The zorblax river flows through velmora."),
            Document::new("z2", "Zorblax basin", "The zorblax river basin is wide."),
            Document::new("z3", "Eels", "Silver eels live in the zorblax river."),
            Document::new("z4", "Boats", "Zorblax river boats carry timber."),
            Document::new("z5", "Delta", "The velmora delta freezes every winter."),
        ];
        let corpus = synthetic_corpus(45, &topical);
        let question = Question::new("river", "What is known about the zorblax river?");
        let config = EngineConfig {
            initial_docs: 4,
            ..EngineConfig::default()
        };
        (corpus, question, config)
    }

    /// Scripted model for [`river_world`]:
    /// claim 1 cites its support plus a redundant document, claim 2 cites a
    /// wrong document (the memory holds the right one), claim 3 first cites a
    /// wrong document and needs a query to find its support.
    pub fn river_llm(transcript: Transcript) -> FnLlm {
        FnLlm::new(move |req| {
            let p = &req.prompt;
            let out = match prompt_kind(p) {
                PromptKind::Claim => RIVER_CLAIMS
                    .get(count_done(p, &RIVER_CLAIMS))
                    .map_or("<EOS>".to_string(), |c| c.to_string()),
                PromptKind::Citation => {
                    let s = cited_sentence(p);
                    let marks: Vec<usize> = if s == RIVER_CLAIMS[0] {
                        vec![index_of(p, "flows through").unwrap(), index_of(p, "basin").unwrap()]
                    } else if s == RIVER_CLAIMS[1] {
                        vec![index_of(p, "timber").unwrap()]
                    } else {
                        vec![index_of(p, "freezes").unwrap_or(1)]
                    };
                    let marks: String = marks.iter().map(|m| format!("[{m}]")).collect();
                    format!("{s}{marks}")
                }
                PromptKind::Query => "velmora delta winter".to_string(),
                other => panic!("unexpected prompt {other:?}"),
            };
            transcript.lock().unwrap().push((p.clone(), out.clone()));
            Ok(out)
        })
    }

    /// Three claims whose supporting documents share no word with the
    /// question or with each other, so each is reachable only through a
    /// query naming its own claim.
    pub fn delayed_support() -> (Vec<Document>, Question, Vec<String>) {
        let support = [
            ("k1", "Plains host wild bison."),
            ("k2", "Winters bring heavy snowfall."),
            ("k3", "Farmers grow amber barley."),
        ];
        let extra: Vec<Document> = support.iter().map(|(id, t)| Document::new(*id, "", *t)).collect();
        let corpus = synthetic_corpus(30, &extra);
        (
            corpus,
            Question::new("kelvor", "Describe the region."),
            support.iter().map(|(_, t)| t.to_string()).collect(),
        )
    }

    /// Router for [`delayed_support`]: the n-th query for a claim returns
    /// filler words until n reaches `refreshes`, then the claim itself.
    pub fn delayed_llm(claims: Vec<String>, refreshes: usize) -> FnLlm {
        let queries: Mutex<HashMap<String, usize>> = Mutex::new(HashMap::new());
        FnLlm::new(move |req| {
            let p = &req.prompt;
            let refs: Vec<&str> = claims.iter().map(String::as_str).collect();
            Ok(match prompt_kind(p) {
                PromptKind::Claim => refs.get(count_done(p, &refs)).map_or("<EOS>".to_string(), |c| c.to_string()),
                PromptKind::Citation => {
                    let s = cited_sentence(p);
                    let key = s.trim_end_matches('.');
                    format!("{s}[{}]", index_of(p, key).unwrap_or(1))
                }
                PromptKind::Query => {
                    let claim = query_claim(p);
                    let mut q = queries.lock().unwrap();
                    let n = q.entry(claim.clone()).or_default();
                    *n += 1;
                    if *n >= refreshes {
                        claim
                    } else {
                        ["granite harbor", "lantern meadow", "orchard pebble", "quarry saddle"][*n % 4].to_string()
                    }
                }
                other => panic!("unexpected prompt {other:?}"),
            })
        })
    }
}
