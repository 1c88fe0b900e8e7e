//! Block-structured attention masks.

use crate::fragment::FragmentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskLayout {
    /// `[[BD, OBC], [0, BC]]` over the concatenation of the noised and
    /// clean sequences, each of length `length`.
    Training { length: usize, block: usize },
    /// Active block rows against `cached` frozen positions followed by the
    /// `block` active positions.
    Inference { cached: usize, block: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    layout: MaskLayout,
}

impl AttentionMask {
    fn zeros(rows: usize, cols: usize, layout: MaskLayout) -> Self {
        Self { rows, cols, bits: vec![false; rows * cols], layout }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layout(&self) -> MaskLayout {
        self.layout
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    fn fill(&mut self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) {
        for i in rows {
            for j in cols.clone() {
                self.bits[i * self.cols + j] = true;
            }
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// The `2L x 2L` training mask, filled block by block.
pub fn build_train_mask(cfg: FragmentConfig) -> AttentionMask {
    let l = cfg.length();
    let mut m = AttentionMask::zeros(2 * l, 2 * l, MaskLayout::Training { length: l, block: cfg.block() });
    for b in 0..cfg.blocks() {
        let rows = cfg.block_range(b);
        // block-diagonal over the noised half
        m.fill(rows.clone(), rows.clone());
        // noised rows see clean blocks strictly before their own
        m.fill(rows.clone(), l..l + b * cfg.block());
        // clean rows see clean blocks up to and including their own
        let clean_rows = l + rows.start..l + rows.end;
        m.fill(clean_rows, l..l + (b + 1) * cfg.block());
    }
    m
}

/// Inference mask for a window of `window` columns whose last `block`
/// columns are the active block. Every active row sees every column.
pub fn build_infer_mask(window: usize, block: usize) -> AttentionMask {
    assert!(window >= block, "window {window} shorter than block {block}");
    let mut m = AttentionMask::zeros(block, window, MaskLayout::Inference { cached: window - block, block });
    m.fill(0..block, 0..window);
    m
}
