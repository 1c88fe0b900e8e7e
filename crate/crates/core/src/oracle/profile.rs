use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{descriptors, fingerprint, parse_smiles, Fingerprint, DEFAULT_WIDTH};

pub const BUILTIN_TARGETS: [&str; 5] = ["parp1", "fa7", "5ht1b", "braf", "jak2"];

const BUILTIN_FILES: [&str; 5] = [
    include_str!("../../data/targets/parp1.json"),
    include_str!("../../data/targets/fa7.json"),
    include_str!("../../data/targets/5ht1b.json"),
    include_str!("../../data/targets/braf.json"),
    include_str!("../../data/targets/jak2.json"),
];

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown target {0:?}")]
    Unknown(String),
    #[error("profile I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("seed molecule {0:?} does not parse")]
    BadSeed(String),
    #[error("hit threshold must be negative, got {0}")]
    BadThreshold(f64),
}

/// On-disk form of a target profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub name: String,
    pub threshold_ds: f64,
    pub seed_smiles: String,
    /// Defaults to the seed's heavy-atom count.
    #[serde(default)]
    pub size_optimum: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    pub name: String,
    pub threshold_ds: f64,
    pub seed_smiles: String,
    pub size_optimum: usize,
    pub target_fp: Fingerprint,
}

impl OracleProfile {
    pub fn from_file(file: ProfileFile) -> Result<Self, ProfileError> {
        if !(file.threshold_ds < 0.0) {
            return Err(ProfileError::BadThreshold(file.threshold_ds));
        }
        let mol = parse_smiles(&file.seed_smiles).map_err(|_| ProfileError::BadSeed(file.seed_smiles.clone()))?;
        let target_fp = fingerprint(&mol, DEFAULT_WIDTH).expect("default width is valid");
        let size_optimum = file.size_optimum.unwrap_or_else(|| descriptors(&mol).heavy_atoms);
        Ok(Self { name: file.name, threshold_ds: file.threshold_ds, seed_smiles: file.seed_smiles, size_optimum, target_fp })
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self) -> ProfileFile {
        ProfileFile {
            name: self.name.clone(),
            threshold_ds: self.threshold_ds,
            seed_smiles: self.seed_smiles.clone(),
            size_optimum: Some(self.size_optimum),
        }
    }
}

pub fn builtin_profiles() -> Vec<OracleProfile> {
    BUILTIN_FILES.iter().map(|f| OracleProfile::from_json(f).expect("bundled profile is valid")).collect()
}

pub fn builtin_profile(name: &str) -> Result<OracleProfile, ProfileError> {
    builtin_profiles().into_iter().find(|p| p.name == name).ok_or_else(|| ProfileError::Unknown(name.to_string()))
}
