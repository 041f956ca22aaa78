use super::vocab::{Vocabulary, CLS_ID, SEP_ID};
use crate::error::{Error, Result};

/// Smallest sequence that holds one token per sentence plus the three markers.
pub const MIN_MAX_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizeOptions {
    pub max_len: usize,
    /// Use `[CLS] a [SEP] b [SEP]` instead of `[CLS] a [SEP] b [CLS]`.
    pub single_cls: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        Self { max_len: 128, single_cls: false }
    }
}

/// Concatenated token ids of a sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub ids: Vec<u32>,
    /// Tokens kept from the first sentence.
    pub len_a: usize,
    /// Tokens kept from the second sentence.
    pub len_b: usize,
    pub label: Option<usize>,
}

impl TokenizedPair {
    /// Total token count `l_ab = len_a + len_b + 3`.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    /// Position of the separator between the two sentences.
    pub fn sep_position(&self) -> usize {
        self.len_a + 1
    }
}

/// Lowercased whitespace tokens.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// `[CLS] a... [SEP] b... [CLS]`, truncating the longer sentence first until
/// the sequence fits `max_len`. Both boundary tokens always survive.
pub fn tokenize_pair(s_a: &str, s_b: &str, vocab: &Vocabulary, options: TokenizeOptions) -> Result<TokenizedPair> {
    if options.max_len < MIN_MAX_LEN {
        return Err(Error::Input(format!("max_len must be at least {MIN_MAX_LEN}, got {}", options.max_len)));
    }
    let a = words(s_a);
    let b = words(s_b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("sentence is empty after tokenization".into()));
    }
    let (mut len_a, mut len_b) = (a.len(), b.len());
    while len_a + len_b + 3 > options.max_len {
        if len_a > len_b {
            len_a -= 1;
        } else {
            len_b -= 1;
        }
    }
    let mut ids = Vec::with_capacity(len_a + len_b + 3);
    ids.push(CLS_ID);
    ids.extend(a[..len_a].iter().map(|w| vocab.id(w)));
    ids.push(SEP_ID);
    ids.extend(b[..len_b].iter().map(|w| vocab.id(w)));
    ids.push(if options.single_cls { SEP_ID } else { CLS_ID });
    Ok(TokenizedPair { ids, len_a, len_b, label: None })
}
