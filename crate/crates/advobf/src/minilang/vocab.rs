//! The shared token vocabulary Ω.
//!
//! Every model-visible token of every program maps to one dense id; the
//! same pool is shared by all transforms, so a word inserted as a print
//! argument and a word chosen as a new variable name come from the same
//! space.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::token::{is_identifier_shaped, RESERVED_WORDS};

/// Out-of-vocabulary fallback.
pub const UNK: &str = "<unk>";
/// Default content of an unselected insert placeholder.
pub const PLACEHOLDER: &str = "<ph>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    identifier_ok: Vec<bool>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed vocabulary file: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    identifier_ok: Vec<bool>,
}

impl Vocabulary {
    /// Build from a token list. Duplicates are dropped, `<unk>` and `<ph>`
    /// are forced to ids 0 and 1, and identifier-legality is derived from
    /// shape plus the reserved-word set.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut list: Vec<String> = vec![UNK.to_string(), PLACEHOLDER.to_string()];
        let mut index: HashMap<String, usize> = HashMap::new();
        index.insert(UNK.to_string(), 0);
        index.insert(PLACEHOLDER.to_string(), 1);
        for t in tokens {
            let t = t.as_ref();
            if !index.contains_key(t) {
                index.insert(t.to_string(), list.len());
                list.push(t.to_string());
            }
        }
        let identifier_ok = list
            .iter()
            .map(|t| is_identifier_shaped(t) && !RESERVED_WORDS.contains(&t.as_str()))
            .collect();
        Vocabulary {
            tokens: list,
            identifier_ok,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, falling back to `<unk>`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_id(&self) -> usize {
        0
    }

    pub fn placeholder_id(&self) -> usize {
        1
    }

    pub fn is_identifier_ok(&self, id: usize) -> bool {
        self.identifier_ok[id]
    }

    /// Ids of all identifier-legal tokens, ascending.
    pub fn identifier_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.identifier_ok[i]).collect()
    }

    /// Ids of tokens that are integer literals, ascending.
    pub fn int_literal_ids(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                !self.tokens[i].is_empty() && self.tokens[i].bytes().all(|b| b.is_ascii_digit())
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let file = VocabFile {
            tokens: self.tokens.clone(),
            identifier_ok: self.identifier_ok.clone(),
        };
        let mut text = serde_json::to_string(&file).expect("vocabulary serializes");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let text = fs::read_to_string(path)?;
        let file: VocabFile =
            serde_json::from_str(&text).map_err(|e| VocabError::Format(e.to_string()))?;
        if file.tokens.len() != file.identifier_ok.len() {
            return Err(VocabError::Format(
                "tokens and identifier_ok lengths differ".into(),
            ));
        }
        if file.tokens.first().map(String::as_str) != Some(UNK)
            || file.tokens.get(1).map(String::as_str) != Some(PLACEHOLDER)
        {
            return Err(VocabError::Format(format!(
                "vocabulary must start with {UNK} and {PLACEHOLDER}"
            )));
        }
        let index = file
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            tokens: file.tokens,
            identifier_ok: file.identifier_ok,
            index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_stable() {
        let v = Vocabulary::new(["def", ":", "p", "def", "5"]);
        assert_eq!(v.len(), 6); // <unk>, <ph>, def, :, p, 5
        assert_eq!(v.id("def"), Some(2));
        assert_eq!(v.id("5"), Some(5));
        assert_eq!(v.id_or_unk("missing"), 0);
        for i in 0..v.len() {
            assert_eq!(v.id(v.token(i)), Some(i));
        }
    }

    #[test]
    fn reserved_words_are_never_identifier_legal() {
        let v = Vocabulary::new(["def", "total", "True", "_dead", "abs", "5", "+"]);
        assert!(v.is_identifier_ok(v.id("total").unwrap()));
        for reserved in ["def", "True", "_dead", "abs"] {
            assert!(!v.is_identifier_ok(v.id(reserved).unwrap()), "{reserved}");
        }
        assert!(!v.is_identifier_ok(v.id("5").unwrap()));
        assert!(!v.is_identifier_ok(v.id("+").unwrap()));
        assert!(!v.is_identifier_ok(v.placeholder_id()));
    }

    #[test]
    fn int_literal_ids_pick_digit_tokens() {
        let v = Vocabulary::new(["5", "12", "x2", "+"]);
        let ids = v.int_literal_ids();
        assert_eq!(ids.len(), 2);
        assert!(ids.contains(&v.id("5").unwrap()));
        assert!(ids.contains(&v.id("12").unwrap()));
    }

    #[test]
    fn save_load_round_trip() {
        let v = Vocabulary::new(["def", "total", "5"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.json");
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(v, loaded);
    }
}
