use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

/// A titled passage from the corpus. Identity is the corpus id, never a
/// position in some prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    /// Reference answers, or sub-claims for long-form datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<String>>,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold: None,
        }
    }

    pub fn with_gold(mut self, gold: Vec<String>) -> Self {
        self.gold = Some(gold);
        self
    }
}

/// One generated claim and the ids of the documents it cites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerUnit {
    pub claim: String,
    pub citations: Vec<String>,
    /// False when the unit was force-accepted after exhausting trials, or
    /// produced by a baseline that never verifies.
    #[serde(default)]
    pub verified: bool,
}

impl AnswerUnit {
    pub fn new(claim: impl Into<String>, citations: Vec<String>) -> Self {
        Self {
            claim: claim.into(),
            citations,
            verified: false,
        }
    }

    pub fn verified(mut self, verified: bool) -> Self {
        self.verified = verified;
        self
    }
}

/// Resolves document ids against some universe of documents.
pub trait DocumentLookup {
    fn document(&self, id: &str) -> Option<&Document>;

    fn contains(&self, id: &str) -> bool {
        self.document(id).is_some()
    }
}

impl DocumentLookup for HashMap<String, Document> {
    fn document(&self, id: &str) -> Option<&Document> {
        self.get(id)
    }
}

impl DocumentLookup for BTreeMap<String, Document> {
    fn document(&self, id: &str) -> Option<&Document> {
        self.get(id)
    }
}

impl DocumentLookup for [Document] {
    fn document(&self, id: &str) -> Option<&Document> {
        self.iter().find(|d| d.id == id)
    }
}

impl DocumentLookup for Vec<Document> {
    fn document(&self, id: &str) -> Option<&Document> {
        self.as_slice().document(id)
    }
}

impl<T: DocumentLookup + ?Sized> DocumentLookup for &T {
    fn document(&self, id: &str) -> Option<&Document> {
        (**self).document(id)
    }
}
