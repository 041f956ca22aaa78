use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Reserved tokens, in the order they occupy ids 0..4.
pub const RESERVED: [&str; 4] = [PAD, UNK, CLS, SEP];

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;

/// Dense token ↔ id map. Ids 0..4 are always the reserved tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from an ordered token list that must begin with the reserved
    /// tokens and contain no duplicates.
    pub fn from_tokens<I, S>(tokens: I) -> std::result::Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for (i, reserved) in RESERVED.iter().enumerate() {
            match tokens.get(i) {
                Some(t) if t == reserved => {}
                Some(t) => return Err(format!("line {} must be {reserved}, found {t:?}", i + 1)),
                None => return Err(format!("missing reserved token {reserved}")),
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(format!("line {}: token {t:?} is empty or contains whitespace", i + 1));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(format!("line {}: duplicate token {t:?}", i + 1));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Reserved tokens followed by `words` in first-seen order.
    pub fn build<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, u32> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        for w in words {
            let w = w.as_ref();
            if !index.contains_key(w) {
                index.insert(w.to_string(), tokens.len() as u32);
                tokens.push(w.to_string());
            }
        }
        Self { tokens, index }
    }

    /// Reads a vocabulary file: UTF-8, one token per line, line number = id.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines = text.lines().map(|l| l.trim_end_matches('\r'));
        Self::from_tokens(lines).map_err(|m| Error::format(path, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or the `[UNK]` id.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}
