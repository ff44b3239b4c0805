//! Prompt templates with `{Name}` placeholders.
//!
//! Defaults are compiled in from `assets/prompts/<name>.txt`. Few-shot
//! demonstrations live next to them as `<name>.demos.txt` and are bound to
//! the `{Demos}` placeholder. A template directory given in the config
//! overrides any file it contains.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::memory::MemoryView;

pub const CLAIM: &str = "claim";
pub const CITATION: &str = "citation";
pub const QUERY: &str = "query";
pub const VANILLA: &str = "vanilla";
pub const SUMMARIZE: &str = "summarize";
pub const SNIPPET: &str = "snippet";

const DEFAULTS: &[(&str, &str)] = &[
    (CLAIM, include_str!("../assets/prompts/claim.txt")),
    (CITATION, include_str!("../assets/prompts/citation.txt")),
    (QUERY, include_str!("../assets/prompts/query.txt")),
    (VANILLA, include_str!("../assets/prompts/vanilla.txt")),
    (SUMMARIZE, include_str!("../assets/prompts/summarize.txt")),
    (SNIPPET, include_str!("../assets/prompts/snippet.txt")),
];

const DEFAULT_DEMOS: &[(&str, &str)] = &[
    (CLAIM, include_str!("../assets/prompts/claim.demos.txt")),
    (CITATION, include_str!("../assets/prompts/citation.demos.txt")),
    (VANILLA, include_str!("../assets/prompts/vanilla.demos.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    text: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let pieces = parse(&text);
        Self {
            name: name.into(),
            text,
            pieces,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Placeholder names, each once, in order of first appearance.
    pub fn required(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.pieces {
            if let Piece::Slot(name) = p {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    /// Substitute every placeholder. Bound values are inserted verbatim and
    /// never re-scanned for placeholders.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String> {
        let mut out = String::with_capacity(self.text.len());
        for p in &self.pieces {
            match p {
                Piece::Literal(s) => out.push_str(s),
                Piece::Slot(name) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| Error::Template {
                            template: self.name.clone(),
                            placeholder: name.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse(text: &str) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                literal.push_str(&rest[..open]);
                if !literal.is_empty() {
                    pieces.push(Piece::Literal(std::mem::take(&mut literal)));
                }
                pieces.push(Piece::Slot(after[..close].to_string()));
                rest = &after[close + 1..];
            }
            _ => {
                literal.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    pieces
}

/// The set of named templates and their demonstrations.
#[derive(Debug, Clone)]
pub struct Templates {
    templates: BTreeMap<String, PromptTemplate>,
    demos: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        let templates = DEFAULTS
            .iter()
            .map(|(name, text)| (name.to_string(), PromptTemplate::new(*name, trim_final_newline(text))))
            .collect();
        let demos = DEFAULT_DEMOS
            .iter()
            .map(|(name, text)| (name.to_string(), text.to_string()))
            .collect();
        Self { templates, demos }
    }
}

fn trim_final_newline(text: &str) -> &str {
    text.strip_suffix('\n').unwrap_or(text)
}

impl Templates {
    /// Defaults overridden by `<name>.txt` / `<name>.demos.txt` files found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut out = Self::default();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path)?;
            if let Some(name) = file.strip_suffix(".demos.txt") {
                out.demos.insert(name.to_string(), text);
            } else if let Some(name) = file.strip_suffix(".txt") {
                out.templates
                    .insert(name.to_string(), PromptTemplate::new(name, trim_final_newline(&text)));
            }
        }
        Ok(out)
    }

    /// Drop all demonstrations (zero-shot prompts).
    pub fn without_demos(mut self) -> Self {
        self.demos.clear();
        self
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.name.clone(), template);
    }

    pub fn set_demos(&mut self, name: &str, demos: impl Into<String>) {
        self.demos.insert(name.to_string(), demos.into());
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(name)
            .ok_or_else(|| Error::Precondition(format!("no prompt template named `{name}`")))
    }

    /// Render `name`, binding `{Demos}` automatically.
    pub fn render(&self, name: &str, bindings: &[(&str, &str)]) -> Result<String> {
        let demos = self.demos.get(name).map(String::as_str).unwrap_or("");
        let mut all: Vec<(&str, &str)> = bindings.to_vec();
        all.push(("Demos", demos));
        self.get(name)?.render(&all)
    }
}

/// `[i] (Title: ...) text` lines for every document in the view.
pub fn format_documents(view: &MemoryView) -> String {
    view.entries()
        .map(|(i, d)| format!("[{i}] (Title: {}) {}", d.title, d.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// English word for small counts, digits otherwise.
pub fn count_word(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n).map(|w| w.to_string()).unwrap_or_else(|| n.to_string())
}
