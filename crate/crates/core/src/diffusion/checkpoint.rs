use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::predictor::PredictorParams;
use crate::fragment::FragmentConfig;
use crate::vocab::Vocab;

pub const CHECKPOINT_FORMAT: &str = "blockmol-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format {0:?}, version {1})")]
    Format(String, u32),
    #[error("vocabulary hash {found} does not match stored {stored}")]
    VocabHash { stored: String, found: String },
    #[error("parameter tables do not match their declared shapes")]
    Shape,
    #[error("stored fragment config is invalid")]
    Config,
}

/// Everything needed to resume sampling: vocabulary, layout, weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocab: Vocab,
    pub vocab_hash: String,
    pub fragment: FragmentConfig,
    pub params: PredictorParams,
    pub seed: u64,
    pub epoch_losses: Vec<f64>,
}

impl Checkpoint {
    pub fn new(vocab: Vocab, fragment: FragmentConfig, params: PredictorParams, seed: u64, epoch_losses: Vec<f64>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            vocab_hash: vocab.hash(),
            vocab,
            fragment,
            params,
            seed,
            epoch_losses,
        }
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Self = serde_json::from_str(text)?;
        ck.verify()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn verify(&self) -> Result<(), CheckpointError> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Format(self.format.clone(), self.version));
        }
        let found = self.vocab.hash();
        if found != self.vocab_hash {
            return Err(CheckpointError::VocabHash { stored: self.vocab_hash.clone(), found });
        }
        FragmentConfig::new(self.fragment.length(), self.fragment.block()).map_err(|_| CheckpointError::Config)?;
        let p = &self.params;
        let ok = p.vocab_size == self.vocab.len()
            && p.embed.len() == p.vocab_size * p.dim
            && p.gain.len() == (2 * p.window + 1) * p.dim
            && p.output.len() == p.dim * p.vocab_size
            && p.bias.len() == p.vocab_size;
        if !ok {
            return Err(CheckpointError::Shape);
        }
        Ok(())
    }
}
