//! Property and docking oracles: deterministic surrogates computed from
//! descriptors and fingerprints, and a subprocess protocol for real scorers.

mod external;
mod profile;
mod surrogate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ExternalOracle, ExternalOracleConfig};
pub use profile::{builtin_profile, builtin_profiles, OracleProfile, ProfileError, ProfileFile, BUILTIN_TARGETS};
pub use surrogate::{surrogate_ds, surrogate_qed, surrogate_sa, SurrogateOracle};

use crate::chem::FingerprintError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub qed: f64,
    pub sa: f64,
    pub ds: f64,
}

impl PropertyRecord {
    /// Clamps QED to [0, 1] and SA to [1, 10].
    pub fn clamped(self) -> Self {
        Self { qed: self.qed.clamp(0.0, 1.0), sa: self.sa.clamp(1.0, 10.0), ds: self.ds }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("molecule is not valid: {0}")]
    InvalidMolecule(String),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error("oracle did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("oracle protocol error: {0}")]
    Protocol(String),
    #[error("oracle process exited")]
    ChildExited,
    #[error("could not start oracle process: {0}")]
    Spawn(String),
}

impl OracleError {
    /// Errors after which the oracle cannot answer further queries.
    pub fn is_fatal(&self) -> bool {
        matches!(self, OracleError::ChildExited | OracleError::Spawn(_))
    }
}

/// Anything that scores a SMILES string.
pub trait Oracle {
    fn score(&mut self, smiles: &str) -> Result<PropertyRecord, OracleError>;
}
