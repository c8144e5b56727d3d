use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_TERMS: [&str; 11] = [
    "holotype",
    "isotype",
    "lectotype",
    "isolectotype",
    "neotype",
    "isoneotype",
    "syntype",
    "isosyntype",
    "paratype",
    "epitype",
    "type",
];

/// Type-status vocabulary. A status counts when its normalized form
/// contains any term and equals none of the negative forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocabulary {
    terms: Vec<String>,
    negatives: Vec<String>,
}

impl Default for TypeVocabulary {
    fn default() -> Self {
        TypeVocabulary {
            terms: DEFAULT_TERMS.iter().map(|s| s.to_string()).collect(),
            negatives: vec!["notatype".to_string()],
        }
    }
}

/// Lowercase, alphanumerics only: "Not a type" -> "notatype".
pub fn normalize_status(raw: &str) -> String {
    raw.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl TypeVocabulary {
    /// One term per line; `!term` adds a negative form; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut v = TypeVocabulary { terms: Vec::new(), negatives: Vec::new() };
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.strip_prefix('!') {
                Some(neg) => v.negatives.push(normalize_status(neg)),
                None => v.terms.push(normalize_status(line)),
            }
        }
        v.terms.retain(|t| !t.is_empty());
        if v.terms.is_empty() {
            return Err(Error::InvalidParameter("type vocabulary has no terms".into()));
        }
        Ok(v)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn is_type(&self, raw: &str) -> bool {
        let s = normalize_status(raw);
        !s.is_empty() && !self.negatives.contains(&s) && self.terms.iter().any(|t| s.contains(t.as_str()))
    }
}
