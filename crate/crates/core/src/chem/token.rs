use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Atom,
    BracketAtom,
    Bond,
    RingBond,
    BranchOpen,
    BranchClose,
    Dot,
    Bos,
    Eos,
    Pad,
    Mask,
}

impl TokenKind {
    pub fn is_control(self) -> bool {
        matches!(self, TokenKind::Bos | TokenKind::Eos | TokenKind::Pad | TokenKind::Mask)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self { kind, text: text.into() }
    }
}

/// An ordered run of tokens. Joining the surface strings gives back the
/// original SMILES text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.0.iter().map(|t| t.text.as_str()).collect()
    }

    /// Concatenated surface text.
    pub fn join(&self) -> String {
        self.0.iter().map(|t| t.text.as_str()).collect()
    }

    /// Drops BOS/EOS/PAD/MASK tokens.
    pub fn strip_control(&self) -> TokenSeq {
        TokenSeq(self.0.iter().filter(|t| !t.kind.is_control()).cloned().collect())
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("unknown character {ch:?} at position {position}")]
    UnknownCharacter { position: usize, ch: char },
    #[error("bracket atom opened at position {position} is never closed")]
    UnterminatedBracket { position: usize },
}

/// Splits a SMILES string into atom, bond, ring, branch and dot tokens.
pub fn tokenize(text: &str) -> Result<TokenSeq, TokenizeError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let unknown = || TokenizeError::UnknownCharacter {
            position: i,
            ch: text[i..].chars().next().unwrap_or('\u{fffd}'),
        };
        let (kind, len) = match c {
            b'[' => {
                let close = bytes[i..]
                    .iter()
                    .position(|&b| b == b']')
                    .ok_or(TokenizeError::UnterminatedBracket { position: i })?;
                if let Some(bad) = bytes[i + 1..i + close]
                    .iter()
                    .position(|b| !(b.is_ascii_alphanumeric() || b"@+-:#".contains(b)))
                {
                    let pos = i + 1 + bad;
                    return Err(TokenizeError::UnknownCharacter {
                        position: pos,
                        ch: text[pos..].chars().next().unwrap_or('\u{fffd}'),
                    });
                }
                (TokenKind::BracketAtom, close + 1)
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => (TokenKind::Atom, 2),
            b'B' if bytes.get(i + 1) == Some(&b'r') => (TokenKind::Atom, 2),
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => (TokenKind::Atom, 1),
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => (TokenKind::Atom, 1),
            b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => (TokenKind::Bond, 1),
            b'0'..=b'9' => (TokenKind::RingBond, 1),
            b'%' => match (bytes.get(i + 1), bytes.get(i + 2)) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    (TokenKind::RingBond, 3)
                }
                _ => return Err(unknown()),
            },
            b'(' => (TokenKind::BranchOpen, 1),
            b')' => (TokenKind::BranchClose, 1),
            b'.' => (TokenKind::Dot, 1),
            _ => return Err(unknown()),
        };
        out.push(Token::new(kind, &text[i..i + len]));
        i += len;
    }
    Ok(TokenSeq(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn benzene_is_one_token_per_char() {
        let toks = tokenize("c1ccccc1").unwrap();
        assert_eq!(toks.len(), 8);
        assert!(toks.iter().all(|t| matches!(t.kind, TokenKind::Atom | TokenKind::RingBond)));
    }

    #[test]
    fn stereocenter_prefix() {
        let toks = tokenize("N[C@@H](CO)").unwrap();
        assert_eq!(toks.texts(), vec!["N", "[C@@H]", "(", "C", "O", ")"]);
        assert_eq!(toks.0[1].kind, TokenKind::BracketAtom);
    }

    #[test]
    fn two_letter_halogens() {
        assert_eq!(tokenize("CCl").unwrap().texts(), vec!["C", "Cl"]);
        assert_eq!(tokenize("BrCBr").unwrap().texts(), vec!["Br", "C", "Br"]);
    }

    #[test]
    fn percent_ring_bond() {
        let toks = tokenize("C%12CC%12").unwrap();
        assert_eq!(toks.texts(), vec!["C", "%12", "C", "C", "%12"]);
        assert_eq!(toks.0[1].kind, TokenKind::RingBond);
    }

    #[test]
    fn unknown_character_reports_position() {
        assert_eq!(
            tokenize("CCX").unwrap_err(),
            TokenizeError::UnknownCharacter { position: 2, ch: 'X' }
        );
        assert!(matches!(tokenize("C%1"), Err(TokenizeError::UnknownCharacter { position: 1, .. })));
        assert!(matches!(tokenize("C[NH"), Err(TokenizeError::UnterminatedBracket { position: 1 })));
    }

    proptest! {
        #[test]
        fn join_round_trips(parts in proptest::collection::vec(
            prop::sample::select(vec![
                "C", "c", "N", "n", "O", "Cl", "Br", "1", "2", "%10", "(", ")", "=", "#",
                "[nH]", "[N+]", "[O-]", "[C@@H]", ".", "/", "\\", "S", "F",
            ]),
            1..40,
        )) {
            let text: String = parts.concat();
            let toks = tokenize(&text).unwrap();
            prop_assert_eq!(toks.join(), text);
        }
    }
}
