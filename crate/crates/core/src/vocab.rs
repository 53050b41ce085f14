use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;

pub const BOS_STR: &str = "<s>";
pub const EOS_STR: &str = "</s>";
pub const UNK_STR: &str = "<unk>";

/// Dense token alphabet. Ids 0, 1 and 2 are always BOS, EOS and UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for s in [BOS_STR, EOS_STR, UNK_STR] {
            v.insert(s);
        }
        v
    }

    /// Builds a vocabulary from token strings in first-appearance order.
    pub fn from_tokens<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut v = Self::new();
        for t in tokens {
            v.insert(t);
        }
        v
    }

    /// Rebuilds a vocabulary from an id-ordered token list.
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != BOS_STR || tokens[1] != EOS_STR || tokens[2] != UNK_STR
        {
            return Err(Error::InvalidParameter(
                "vocabulary must start with <s>, </s>, <unk>".to_string(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "duplicate token {t:?} in vocabulary"
                )));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Adds `token` if absent and returns its id.
    pub fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the reserved tokens are present in every vocabulary.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        split_tokens(text).map(|t| self.id_or_unk(&t)).collect()
    }

    /// Joins ids back into text, skipping BOS/EOS.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == BOS || id == EOS {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(UNK_STR));
        }
        out
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Self::from_list(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

fn split_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

/// Lowercases and splits on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    split_tokens(text).collect()
}
