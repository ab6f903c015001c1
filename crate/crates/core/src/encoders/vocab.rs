use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const RESERVED: [&str; 2] = ["<pad>", "<unk>"];

/// Lowercases and splits on whitespace and punctuation. Hyphens and
/// apostrophes inside a word are kept, so `empty-handed` is one token.
pub fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '-' && c != '\''))
        .map(|w| w.trim_matches(|c| c == '-' || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Dense token ids; 0 is padding and 1 is the unknown token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Deduplicates while keeping first-seen order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in RESERVED {
            v.push(t);
        }
        for t in tokens {
            let t = t.as_ref();
            if !v.index.contains_key(t) {
                v.push(t);
            }
        }
        v
    }

    /// Sorted vocabulary of every word in `texts`.
    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = texts
            .into_iter()
            .flat_map(|t| split_words(t.as_ref()))
            .collect();
        Self::from_tokens(words)
    }

    fn push(&mut self, t: &str) {
        self.index.insert(t.to_string(), self.tokens.len());
        self.tokens.push(t.to_string());
    }

    /// One token per line; line `n` (1-based) gets id `n + 1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let tok = line.trim();
            if tok.is_empty() || tok.contains(char::is_whitespace) {
                return Err(Error::Vocab(format!("line {}: expected one token", i + 1)));
            }
            if RESERVED.contains(&tok) || tokens.contains(&tok) {
                return Err(Error::Vocab(format!("line {}: duplicate token `{tok}`", i + 1)));
            }
            tokens.push(tok);
        }
        Ok(Self::from_tokens(tokens))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens[RESERVED.len()..] {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        split_words(text).iter().map(|w| self.id(w)).collect()
    }

    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
