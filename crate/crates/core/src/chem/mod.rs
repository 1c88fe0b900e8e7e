//! SMILES tokenization, validation, descriptors and fingerprints.

mod descriptors;
mod elements;
mod fingerprint;
mod parse;
mod token;

pub use descriptors::{adjacency, descriptors, ring_info, DescriptorSet, RingInfo};
pub use elements::{is_halogen, lookup as element, ElementInfo};
pub use fingerprint::{fingerprint, tanimoto, Fingerprint, FingerprintError, DEFAULT_WIDTH, MAX_PATH_BONDS};
pub use parse::{
    parse_smiles, parse_validate, Atom, Bond, BondOrder, ParsedMol, RingClosure, SmilesError,
    ValidationFailure,
};
pub use token::{tokenize, Token, TokenKind, TokenSeq, TokenizeError};

/// Reads a corpus file body: one SMILES per line, blank lines and
/// `#`-prefixed comment lines skipped, surrounding whitespace trimmed.
pub fn corpus_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}
