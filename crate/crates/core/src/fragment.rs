//! Fixed-length soft fragments: padding and position-only block partitioning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{TokenId, BOS, EOS, MASK, PAD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("block length {block} must be at least 1 and divide padded length {length}")]
    BadConfig { length: usize, block: usize },
    #[error("molecule of {actual} tokens does not fit padded length {length} with BOS and EOS")]
    TooLong { actual: usize, length: usize },
    #[error("sequence still has masked positions")]
    IncompleteSequence,
    #[error("tensor length {actual} does not match configured length {length}")]
    LengthMismatch { actual: usize, length: usize },
}

/// Padded length `L` and block length `K`; the block count is `L / K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentConfig {
    length: usize,
    block: usize,
}

impl FragmentConfig {
    pub fn new(length: usize, block: usize) -> Result<Self, FragmentError> {
        if block == 0 || length < block || length % block != 0 {
            return Err(FragmentError::BadConfig { length, block });
        }
        Ok(Self { length, block })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn blocks(&self) -> usize {
        self.length / self.block
    }

    /// Zero-based block index owning `position`.
    pub fn block_of(&self, position: usize) -> usize {
        position / self.block
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        b * self.block..(b + 1) * self.block
    }

    /// Same padded length sliced at a different granularity, as used when
    /// the sampling block length differs from the training one.
    pub fn with_block(&self, block: usize) -> Result<Self, FragmentError> {
        Self::new(self.length, block)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotState {
    Clean,
    Masked,
    /// Fixed context that decoding must not touch.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTensor {
    ids: Vec<TokenId>,
    state: Vec<SlotState>,
    config: FragmentConfig,
}

impl BlockTensor {
    pub fn from_parts(
        ids: Vec<TokenId>,
        state: Vec<SlotState>,
        config: FragmentConfig,
    ) -> Result<Self, FragmentError> {
        if ids.len() != config.length || state.len() != config.length {
            return Err(FragmentError::LengthMismatch { actual: ids.len(), length: config.length });
        }
        Ok(Self { ids, state, config })
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn state(&self) -> &[SlotState] {
        &self.state
    }

    pub fn config(&self) -> FragmentConfig {
        self.config
    }

    pub fn block(&self, b: usize) -> &[TokenId] {
        &self.ids[self.config.block_range(b)]
    }

    pub fn is_clean(&self) -> bool {
        self.state.iter().all(|s| *s != SlotState::Masked) && !self.ids.contains(&MASK)
    }
}

/// Lays out `[BOS, tokens.., EOS, PAD..]` at exactly the configured length.
pub fn pad_and_partition(tokens: &[TokenId], cfg: FragmentConfig) -> Result<BlockTensor, FragmentError> {
    if tokens.len() + 2 > cfg.length {
        return Err(FragmentError::TooLong { actual: tokens.len(), length: cfg.length });
    }
    let mut ids = Vec::with_capacity(cfg.length);
    ids.push(BOS);
    ids.extend_from_slice(tokens);
    ids.push(EOS);
    ids.resize(cfg.length, PAD);
    Ok(BlockTensor { ids, state: vec![SlotState::Clean; cfg.length], config: cfg })
}

/// Inverse of [`pad_and_partition`]: drops BOS, everything from the first
/// EOS on, and any PAD.
pub fn reassemble(bt: &BlockTensor) -> Result<Vec<TokenId>, FragmentError> {
    if !bt.is_clean() {
        return Err(FragmentError::IncompleteSequence);
    }
    Ok(strip_controls(&bt.ids))
}

/// Molecule body of a raw id row: skip a leading BOS, stop at the first EOS,
/// drop PAD.
pub fn strip_controls(ids: &[TokenId]) -> Vec<TokenId> {
    let body = match ids.first() {
        Some(&BOS) => &ids[1..],
        _ => ids,
    };
    body.iter().copied().take_while(|&t| t != EOS).filter(|&t| t != PAD && t != BOS).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn config_validation() {
        assert!(FragmentConfig::new(72, 8).is_ok());
        assert_eq!(FragmentConfig::new(72, 8).unwrap().blocks(), 9);
        assert!(FragmentConfig::new(72, 7).is_err());
        assert!(FragmentConfig::new(72, 0).is_err());
        assert!(FragmentConfig::new(4, 8).is_err());
        let cfg = FragmentConfig::new(72, 8).unwrap();
        assert_eq!(cfg.with_block(2).unwrap().blocks(), 36);
        assert!(cfg.with_block(5).is_err());
    }

    #[test]
    fn six_tokens_fill_first_block() {
        let cfg = FragmentConfig::new(72, 8).unwrap();
        let toks = [10, 11, 12, 13, 14, 15];
        let bt = pad_and_partition(&toks, cfg).unwrap();
        assert_eq!(bt.block(0), &[BOS, 10, 11, 12, 13, 14, 15, EOS]);
        assert!(bt.block(1).iter().all(|&t| t == PAD));
        assert_eq!(cfg.blocks(), 9);
    }

    #[test]
    fn empty_molecule() {
        let cfg = FragmentConfig::new(8, 8).unwrap();
        let bt = pad_and_partition(&[], cfg).unwrap();
        assert_eq!(bt.ids(), &[BOS, EOS, PAD, PAD, PAD, PAD, PAD, PAD]);
        assert_eq!(reassemble(&bt).unwrap(), Vec::<TokenId>::new());
    }

    #[test]
    fn too_long() {
        let cfg = FragmentConfig::new(72, 8).unwrap();
        assert_eq!(
            pad_and_partition(&[9; 71], cfg).unwrap_err(),
            FragmentError::TooLong { actual: 71, length: 72 }
        );
        assert!(pad_and_partition(&[9; 70], cfg).is_ok());
    }

    #[test]
    fn masked_position_is_incomplete() {
        let cfg = FragmentConfig::new(8, 4).unwrap();
        let mut bt = pad_and_partition(&[9, 9], cfg).unwrap();
        bt.ids[2] = MASK;
        bt.state[2] = SlotState::Masked;
        assert_eq!(reassemble(&bt), Err(FragmentError::IncompleteSequence));
    }

    #[test]
    fn partition_is_content_independent() {
        let cfg = FragmentConfig::new(24, 6).unwrap();
        let mut seen = vec![0; 24];
        for b in 0..cfg.blocks() {
            for p in cfg.block_range(b) {
                seen[p] += 1;
                assert_eq!(cfg.block_of(p), b);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    proptest! {
        #[test]
        fn round_trip(blocks in 1usize..10, k in 1usize..9, body in proptest::collection::vec(4u32..40, 0..80)) {
            let cfg = FragmentConfig::new(blocks * k, k).unwrap();
            match pad_and_partition(&body, cfg) {
                Ok(bt) => {
                    prop_assert_eq!(bt.ids().len(), cfg.length());
                    prop_assert_eq!(reassemble(&bt).unwrap(), body);
                }
                Err(FragmentError::TooLong { .. }) => prop_assert!(body.len() + 2 > cfg.length()),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}
