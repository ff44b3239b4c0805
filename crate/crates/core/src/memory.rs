//! Long-term memory holds the initial retrieval plus every verified citation
//! and grows for the whole answer. Short-term memory holds the latest
//! evidence-finder results and is replaced wholesale on each refresh.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Retriever;
use crate::error::{Error, Result};
use crate::types::{Document, DocumentLookup};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    long_term: Vec<Document>,
    short_term: Vec<Document>,
    /// Oldest long-term entries are evicted past this size. `None` never evicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    long_term_cap: Option<usize>,
}

fn dedup(docs: impl IntoIterator<Item = Document>) -> Vec<Document> {
    let mut seen = HashSet::new();
    docs.into_iter().filter(|d| seen.insert(d.id.clone())).collect()
}

impl MemoryState {
    pub fn new(long_term: Vec<Document>, short_term: Vec<Document>) -> Self {
        Self {
            long_term: dedup(long_term),
            short_term: dedup(short_term),
            long_term_cap: None,
        }
    }

    pub fn with_long_term_cap(mut self, cap: Option<usize>) -> Self {
        self.long_term_cap = cap;
        self.enforce_cap();
        self
    }

    /// Long-term memory seeded with the top-`k` documents for the question;
    /// short-term memory empty.
    pub fn init(retriever: &dyn Retriever, question: &str, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("k must be at least 1".into()));
        }
        let docs = retriever.retrieve_documents(question, k)?;
        Ok(Self::new(docs, Vec::new()))
    }

    pub fn long_term(&self) -> &[Document] {
        &self.long_term
    }

    pub fn short_term(&self) -> &[Document] {
        &self.short_term
    }

    pub fn is_empty(&self) -> bool {
        self.long_term.is_empty() && self.short_term.is_empty()
    }

    /// Append citations not yet in long-term memory. Returns the ids added.
    pub fn absorb(&mut self, citations: &[Document]) -> Vec<String> {
        let mut added = Vec::new();
        for doc in citations {
            if self.long_term.iter().any(|d| d.id == doc.id) {
                continue;
            }
            added.push(doc.id.clone());
            self.long_term.push(doc.clone());
        }
        self.enforce_cap();
        added
    }

    /// Replace short-term memory with `docs`, first occurrence of an id wins.
    pub fn refresh(&mut self, docs: Vec<Document>) {
        self.short_term = dedup(docs);
    }

    fn enforce_cap(&mut self) {
        if let Some(cap) = self.long_term_cap {
            if self.long_term.len() > cap {
                let excess = self.long_term.len() - cap;
                self.long_term.drain(..excess);
            }
        }
    }

    /// Long-term entries first, then short-term entries not already present.
    pub fn view(&self) -> MemoryView {
        let mut seen: HashSet<&str> = HashSet::new();
        let docs = self
            .long_term
            .iter()
            .chain(self.short_term.iter())
            .filter(|d| seen.insert(d.id.as_str()))
            .cloned()
            .collect();
        MemoryView { docs }
    }
}

/// Numbered merge of both memories as shown in prompts. Display index `i`
/// (1-based) refers to `documents()[i - 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryView {
    docs: Vec<Document>,
}

impl MemoryView {
    pub fn from_documents(docs: Vec<Document>) -> Self {
        Self { docs: dedup(docs) }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, display_index: usize) -> Option<&Document> {
        display_index.checked_sub(1).and_then(|i| self.docs.get(i))
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &Document)> {
        self.docs.iter().enumerate().map(|(i, d)| (i + 1, d))
    }

    pub fn ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.docs.iter().position(|d| d.id == id).map(|i| i + 1)
    }
}

impl DocumentLookup for MemoryView {
    fn document(&self, id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.id == id)
    }
}
