//! Token vocabulary with fixed control-symbol slots.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{tokenize, TokenKind, TokenSeq};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const MASK: TokenId = 3;

pub const CONTROL_TEXT: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<mask>"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("token id {0} is out of range")]
    UnknownId(TokenId),
    #[error("control token {0:?} listed more than once or out of place")]
    BadControl(String),
    #[error("duplicate token {0:?}")]
    Duplicate(String),
}

/// Control symbols occupy ids 0..4; molecule tokens follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        for (i, c) in CONTROL_TEXT.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*c) {
                return Err(VocabError::BadControl(c.to_string()));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if i >= CONTROL_TEXT.len() && CONTROL_TEXT.contains(&t.as_str()) {
                return Err(VocabError::BadControl(t.clone()));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Builds a vocabulary from every token surface string in `corpus`.
    pub fn from_corpus<'a>(corpus: impl IntoIterator<Item = &'a TokenSeq>) -> Self {
        let body: BTreeSet<String> = corpus
            .into_iter()
            .flat_map(|s| s.iter().filter(|t| !t.kind.is_control()).map(|t| t.text.clone()))
            .collect();
        let tokens = CONTROL_TEXT.iter().map(|s| s.to_string()).chain(body).collect();
        Self::from_tokens(tokens).expect("constructed vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, text: &str) -> Option<TokenId> {
        self.index.get(text).copied()
    }

    pub fn text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, seq: &TokenSeq) -> Result<Vec<TokenId>, VocabError> {
        seq.iter()
            .map(|t| {
                let text = match t.kind {
                    TokenKind::Pad => CONTROL_TEXT[0],
                    TokenKind::Bos => CONTROL_TEXT[1],
                    TokenKind::Eos => CONTROL_TEXT[2],
                    TokenKind::Mask => CONTROL_TEXT[3],
                    _ => t.text.as_str(),
                };
                self.id(text).ok_or_else(|| VocabError::UnknownToken(t.text.clone()))
            })
            .collect()
    }

    /// Tokenizes and encodes a SMILES string.
    pub fn encode_smiles(&self, smiles: &str) -> Result<Vec<TokenId>, EncodeError> {
        Ok(self.encode(&tokenize(smiles)?)?)
    }

    /// Surface text of the non-control tokens in `ids`.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String, VocabError> {
        let mut out = String::new();
        for &id in ids {
            if (id as usize) < CONTROL_TEXT.len() {
                continue;
            }
            out.push_str(self.text(id).ok_or(VocabError::UnknownId(id))?);
        }
        Ok(out)
    }

    /// 64-bit FNV-1a over the newline-joined token list, as hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(std::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = VocabError;
    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Tokenize(#[from] crate::chem::TokenizeError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        let seqs: Vec<TokenSeq> = ["CCO", "c1ccccc1", "CCl"].iter().map(|s| tokenize(s).unwrap()).collect();
        Vocab::from_corpus(&seqs)
    }

    #[test]
    fn control_slots_fixed() {
        let v = vocab();
        assert_eq!(v.id("<pad>"), Some(PAD));
        assert_eq!(v.id("<bos>"), Some(BOS));
        assert_eq!(v.id("<eos>"), Some(EOS));
        assert_eq!(v.id("<mask>"), Some(MASK));
        assert_eq!(v.len(), 4 + 5); // C O c 1 Cl
    }

    #[test]
    fn index_is_bijection() {
        let v = vocab();
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some(i as TokenId));
        }
    }

    #[test]
    fn encode_decode() {
        let v = vocab();
        let ids = v.encode_smiles("CCl").unwrap();
        assert_eq!(v.decode(&ids).unwrap(), "CCl");
        assert!(matches!(v.encode_smiles("CN"), Err(EncodeError::Vocab(VocabError::UnknownToken(_)))));
    }

    #[test]
    fn rejects_malformed_lists() {
        assert!(Vocab::from_tokens(vec!["C".into()]).is_err());
        let mut t: Vec<String> = CONTROL_TEXT.iter().map(|s| s.to_string()).collect();
        t.push("C".into());
        t.push("C".into());
        assert_eq!(Vocab::from_tokens(t), Err(VocabError::Duplicate("C".into())));
    }

    #[test]
    fn serde_round_trip_and_hash() {
        let v = vocab();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert_eq!(v.hash().len(), 16);
    }
}
