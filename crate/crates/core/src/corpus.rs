//! Corpus ingestion and the default lexical retriever.
//!
//! # Scoring
//!
//! Okapi BM25 over [`crate::text::tokenize`] tokens:
//!
//! ```text
//! score(D, Q) = sum over distinct terms q in Q of
//!     idf(q) * tf(q, D) * (k1 + 1) / (tf(q, D) + k1 * (1 - b + b * |D| / avgdl))
//! idf(q) = ln(1 + (N - df(q) + 0.5) / (df(q) + 0.5))
//! ```
//!
//! with `k1 = 1.2`, `b = 0.75`, `N` the document count and `|D|` the token
//! count of title plus text. Only documents with a positive score are
//! returned; ties are broken by ascending id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::tokenize;
use crate::types::{Document, DocumentLookup};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

const INDEX_FILE: &str = "index.json";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub document: Document,
    pub score: f64,
}

/// Anything that ranks documents for a text query.
pub trait Retriever: Send + Sync {
    /// At most `n` documents in descending score order.
    fn retrieve(&self, query: &str, n: usize) -> Result<Vec<ScoredDocument>>;

    fn retrieve_documents(&self, query: &str, n: usize) -> Result<Vec<Document>> {
        Ok(self.retrieve(query, n)?.into_iter().map(|s| s.document).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub document_count: usize,
    pub vocabulary_size: usize,
    pub average_document_length: f64,
}

/// Parse a JSONL corpus: one `{"id", "title", "text"}` object per line.
/// Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = fs::File::open(path)?;
    parse_corpus(BufReader::new(file))
}

pub fn parse_corpus<R: BufRead>(input: R) -> Result<Vec<Document>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("malformed corpus record: {e}"),
        })?;
        if doc.id.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "document id is empty".into(),
            });
        }
        if doc.text.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("document `{}` has empty text", doc.id),
            });
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: doc.id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// In-memory inverted index. Read-only after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexicalIndex {
    version: u32,
    fingerprint: String,
    docs: Vec<Document>,
    doc_lengths: Vec<u32>,
    average_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
}

impl LexicalIndex {
    pub fn build(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: d.id.clone(),
                });
            }
        }

        let mut hasher = Sha256::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            hasher.update(serde_json::to_vec(d)?);
            hasher.update(b"\n");
            let tokens = document_tokens(d);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    tf: count,
                });
            }
        }
        let average_length = average(&doc_lengths);

        Ok(Self {
            version: INDEX_VERSION,
            fingerprint: hex::encode(hasher.finalize()),
            docs,
            doc_lengths,
            average_length,
            postings,
            by_id,
        })
    }

    pub fn from_corpus_file(path: &Path) -> Result<Self> {
        Self::build(read_corpus(path)?)
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            document_count: self.docs.len(),
            vocabulary_size: self.postings.len(),
            average_document_length: self.average_length,
        }
    }

    /// SHA-256 over the ingested records; identifies the corpus in run manifests.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let bytes = serde_json::to_vec(self)?;
        fs::write(dir.join(INDEX_FILE), bytes)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let bytes = fs::read(&path)
            .map_err(|e| Error::Index(format!("cannot read {}: {e}", path.display())))?;
        let mut index: LexicalIndex = serde_json::from_slice(&bytes)?;
        if index.version != INDEX_VERSION {
            return Err(Error::Index(format!(
                "unsupported index version {} (expected {INDEX_VERSION})",
                index.version
            )));
        }
        // recomputed rather than trusted, so loaded scores match bit for bit
        index.average_length = average(&index.doc_lengths);
        index.by_id = index
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(index)
    }

    fn term_weight(&self, df: usize, tf: u32, len: u32) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let tf = tf as f64;
        let norm = if self.average_length > 0.0 {
            1.0 - BM25_B + BM25_B * len as f64 / self.average_length
        } else {
            1.0
        };
        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
    }
}

fn average(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.iter().map(|&l| l as u64).sum::<u64>() as f64 / lengths.len() as f64
}

fn document_tokens(d: &Document) -> Vec<String> {
    let mut tokens = tokenize(&d.title);
    tokens.extend(tokenize(&d.text));
    tokens
}

/// Query terms in first-occurrence order, duplicates removed.
fn query_terms(query: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    tokenize(query)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

impl Retriever for LexicalIndex {
    fn retrieve(&self, query: &str, n: usize) -> Result<Vec<ScoredDocument>> {
        if n == 0 {
            return Err(Error::Precondition("retrieval count must be at least 1".into()));
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in query_terms(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            for p in list {
                let w = self.term_weight(list.len(), p.tf, self.doc_lengths[p.doc as usize]);
                *scores.entry(p.doc).or_default() += w;
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0 as usize].id.cmp(&self.docs[b.0 as usize].id))
        });
        ranked.truncate(n);
        Ok(ranked
            .into_iter()
            .map(|(i, score)| ScoredDocument {
                document: self.docs[i as usize].clone(),
                score,
            })
            .collect())
    }
}

impl DocumentLookup for LexicalIndex {
    fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, "", text)
    }

    #[test]
    fn ingest_counts_records() {
        let input = r#"{"id":"a","title":"A","text":"one two"}
{"id":"b","title":"B","text":"two three"}

{"id":"c","title":"C","text":"three"}
"#;
        let docs = parse_corpus(input.as_bytes()).unwrap();
        let index = LexicalIndex::build(docs).unwrap();
        let stats = index.stats();
        assert_eq!(stats.document_count, 3);
        // a, one, two, b, three, c; lengths 3 + 3 + 2
        assert_eq!(stats.vocabulary_size, 6);
        assert!((stats.average_document_length - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_id_names_its_line() {
        let mut input = String::new();
        for (i, id) in ["a", "b", "c", "d", "b"].iter().enumerate() {
            input.push_str(&format!("{{\"id\":\"{id}\",\"title\":\"\",\"text\":\"t{i}\"}}\n"));
        }
        match parse_corpus(input.as_bytes()) {
            Err(Error::DuplicateId { line, id }) => {
                assert_eq!(line, 5);
                assert_eq!(id, "b");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_reported() {
        let input = "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n";
        let err = parse_corpus(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_corpus() {
        let index = LexicalIndex::build(parse_corpus("".as_bytes()).unwrap()).unwrap();
        assert_eq!(index.stats().document_count, 0);
        assert!(index.retrieve("anything", 3).unwrap().is_empty());
    }

    #[test]
    fn coffee_example_ranking() {
        let index = LexicalIndex::build(vec![
            doc("d1", "coffee health benefits"),
            doc("d2", "tea ceremony history"),
            doc("d3", "coffee anxiety insomnia"),
        ])
        .unwrap();
        let ids: Vec<_> = index
            .retrieve("coffee health", 2)
            .unwrap()
            .into_iter()
            .map(|s| s.document.id)
            .collect();
        assert_eq!(ids, vec!["d1", "d3"]);
    }

    #[test]
    fn no_match_is_empty() {
        let index = LexicalIndex::build(vec![doc("d1", "coffee")]).unwrap();
        assert!(index.retrieve("zebra", 5).unwrap().is_empty());
        assert!(index.retrieve("", 5).unwrap().is_empty());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let index = LexicalIndex::build(vec![
            doc("z", "same words"),
            doc("a", "same words"),
            doc("m", "other"),
        ])
        .unwrap();
        let ids: Vec<_> = index
            .retrieve("same", 5)
            .unwrap()
            .into_iter()
            .map(|s| s.document.id)
            .collect();
        assert_eq!(ids, vec!["a", "z"]);
    }

    #[test]
    fn zero_n_is_rejected() {
        let index = LexicalIndex::build(vec![doc("d1", "coffee")]).unwrap();
        assert!(index.retrieve("coffee", 0).is_err());
    }

    #[test]
    fn save_and_load_preserve_results() {
        let dir = tempfile::tempdir().unwrap();
        let index = LexicalIndex::build(vec![doc("d1", "coffee health"), doc("d2", "coffee")]).unwrap();
        index.save(dir.path()).unwrap();
        let loaded = LexicalIndex::load(dir.path()).unwrap();
        assert_eq!(loaded.fingerprint(), index.fingerprint());
        assert_eq!(loaded.retrieve("coffee health", 2).unwrap(), index.retrieve("coffee health", 2).unwrap());
        assert!(loaded.contains("d2"));
    }

    #[test]
    fn ingestion_is_deterministic() {
        let docs = vec![doc("d1", "coffee health"), doc("d2", "tea")];
        let a = serde_json::to_string(&LexicalIndex::build(docs.clone()).unwrap()).unwrap();
        let b = serde_json::to_string(&LexicalIndex::build(docs).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
