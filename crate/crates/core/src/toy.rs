//! Seeded generator for a small drug-like toy corpus, assembled from ring,
//! linker and terminal fragments and passed through curation.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::tokenize;
use crate::curate::{curate_stream, CurationConfig, CurationReport};

const RINGS: &[&str] = &[
    "c{d}ccc({s})cc{d}",
    "c{d}ccccc{d}",
    "c{d}ccncc{d}",
    "c{d}cc({s})ncc{d}",
    "c{d}cnc({s})nc{d}",
    "C{d}CCN({s})CC{d}",
    "C{d}CCNCC{d}",
    "C{d}CCOCC{d}",
    "C{d}CCCC{d}",
    "C{d}CCCCC{d}",
    "C{d}CCNC{d}",
    "c{d}ccc2ccccc2c{d}",
];
const LINKERS: &[&str] = &["C", "CC", "N", "O", "NC(=O)", "C(=O)N", "OC", "CN", "C(=O)", "CNC(=O)"];
const HEADS: &[&str] = &["", "", "C", "N", "O", "CC", "CO", "NC(=O)"];
const TAILS: &[&str] = &["", "C", "F", "Cl", "O", "N", "C#N", "C(=O)O", "C(F)(F)F", "OC", "C(N)=O"];
const SUBSTITUENTS: &[&str] = &["F", "Cl", "C", "O", "N", "OC", "C#N", "C(C)=O"];

/// One raw candidate; always syntactically valid.
pub fn toy_molecule<R: Rng + ?Sized>(rng: &mut R) -> String {
    let mut s = String::new();
    s.push_str(HEADS.choose(rng).expect("non-empty"));
    let rings = rng.random_range(1..=3);
    for i in 0..rings {
        if i > 0 {
            s.push_str(LINKERS.choose(rng).expect("non-empty"));
        }
        let ring = RINGS.choose(rng).expect("non-empty").replace("{d}", "1");
        s.push_str(&ring.replace("{s}", SUBSTITUENTS.choose(rng).expect("non-empty")));
    }
    s.push_str(TAILS.choose(rng).expect("non-empty"));
    s
}

/// Draws candidates until `n` survive curation and fit in `max_tokens`
/// tokens, or the attempt cap runs out.
pub fn toy_corpus(n: usize, max_tokens: usize, seed: u64) -> (Vec<String>, CurationReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = CurationConfig::default();
    let mut raw = Vec::new();
    let mut kept: Vec<String> = Vec::new();
    let mut report = CurationReport::default();
    let mut attempts = 0;
    while kept.len() < n && attempts < 200 {
        attempts += 1;
        for _ in 0..n.max(64) {
            let m = toy_molecule(&mut rng);
            if tokenize(&m).is_ok_and(|t| t.len() <= max_tokens) {
                raw.push(m);
            }
        }
        let (out, r) = curate_stream(raw.iter().map(String::as_str), &cfg);
        kept = out;
        report = r;
    }
    kept.truncate(n);
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn raw_candidates_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let m = toy_molecule(&mut rng);
            assert!(parse_smiles(&m).is_ok(), "{m}");
        }
    }

    #[test]
    fn corpus_is_deterministic_and_sized() {
        let (a, _) = toy_corpus(60, 70, 1);
        let (b, _) = toy_corpus(60, 70, 1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
    }
}
