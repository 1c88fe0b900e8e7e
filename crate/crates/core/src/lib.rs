//! Block diffusion over SMILES tokens with confidence-ordered decoding and
//! gated tree search, plus the chemistry, curation and evaluation pieces
//! around it.

pub mod chem;
pub mod curate;
pub mod decode;
pub mod diffusion;
pub mod fragment;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod search;
pub mod selftest;
pub mod toy;
pub mod vocab;
