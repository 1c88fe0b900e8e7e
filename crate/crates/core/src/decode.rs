//! Block-wise adaptive confidence decoding.
//!
//! Blocks are resolved left to right. Inside a block each step advances the
//! sequence's diffusion time to the next reveal event and unmasks exactly one
//! position, the one the predictor is most confident about. Finished blocks
//! are frozen and serve as context for the next.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::{BlockScorer, DiffusionError, PredictorParams, ProbTable, Sampling};
use crate::fragment::{strip_controls, FragmentConfig, FragmentError};
use crate::rng::{decode_counter, keyed_uniform, Purpose};
use crate::vocab::{TokenId, BOS, EOS, MASK, PAD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("no masked positions left")]
    ZeroMasked,
    #[error("masked set is empty")]
    EmptyMaskedSet,
    #[error("block needs up to {needed} predictor calls but the budget is {budget}")]
    BudgetExhausted { needed: usize, budget: usize },
    #[error("invalid decode config: {0}")]
    BadConfig(String),
    #[error("prefix of {0} tokens leaves no room to generate")]
    PrefixTooLong(usize),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

/// How the token at the chosen position is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenChoice {
    /// Highest-probability token.
    #[default]
    Greedy,
    /// Drawn from the adjusted distribution; the position is still the most
    /// confident one.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub block: usize,
    pub length: usize,
    /// Context window in tokens preceding the active block.
    pub window: usize,
    /// Predictor-call budget per block.
    pub budget: usize,
    pub sampling: Sampling,
    pub batch: usize,
    pub seed: u64,
    /// Stop after this many blocks; `None` runs to the padded length.
    pub max_blocks: Option<usize>,
    pub choice: TokenChoice,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            block: 8,
            length: 72,
            window: 72,
            budget: 128,
            sampling: Sampling { temperature: 1.1, nucleus: 1.0 },
            batch: 1,
            seed: 42,
            max_blocks: None,
            choice: TokenChoice::Greedy,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<FragmentConfig, DecodeError> {
        let frag = FragmentConfig::new(self.length, self.block)
            .map_err(|e| DecodeError::BadConfig(e.to_string()))?;
        if self.budget == 0 {
            return Err(DecodeError::BadConfig("budget must be at least 1".into()));
        }
        self.sampling.validate()?;
        Ok(frag)
    }

    fn block_limit(&self, frag: FragmentConfig) -> usize {
        self.max_blocks.map_or(frag.blocks(), |s| s.min(frag.blocks()))
    }
}

/// `t * u^(1/m)`: the time of the next reveal when `m` positions are still
/// masked.
pub fn first_hitting_step(t: f64, m: usize, u: f64) -> Result<f64, DecodeError> {
    if m == 0 {
        return Err(DecodeError::ZeroMasked);
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(DiffusionError::OutOfRange(t).into());
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(DecodeError::BadConfig(format!("uniform draw {u} outside (0, 1)")));
    }
    Ok((t * u.powf(1.0 / m as f64)).max(f64::MIN_POSITIVE))
}

/// Most confident `(position, token, probability)` among `masked` rows.
/// Ties go to the lower position, then the lower token id.
pub fn gcd_select(probs: &ProbTable, masked: &[usize]) -> Result<(usize, TokenId, f64), DecodeError> {
    let mut best: Option<(usize, TokenId, f64)> = None;
    let mut sorted = masked.to_vec();
    sorted.sort_unstable();
    for j in sorted {
        let (v, p) = row_argmax(probs.row(j));
        if best.is_none_or(|(_, _, bp)| p > bp) {
            best = Some((j, v, p));
        }
    }
    best.ok_or(DecodeError::EmptyMaskedSet)
}

fn row_argmax(row: &[f64]) -> (TokenId, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (v, &p) in row.iter().enumerate() {
        if p > best.1 {
            best = (v as TokenId, p);
        }
    }
    best
}

/// Inverse-CDF draw; falls back to the last positive entry on rounding.
fn draw_from(row: &[f64], u: f64) -> TokenId {
    let mut cum = 0.0;
    let mut last = 0;
    for (v, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = v;
            if u < cum {
                return v as TokenId;
            }
        }
    }
    last as TokenId
}

/// Batch of sequences being decoded in lock step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeState {
    pub rows: Vec<Vec<TokenId>>,
    /// Diffusion time of each sequence within the current block.
    pub times: Vec<f64>,
    pub done: Vec<bool>,
    /// Next block to decode.
    pub block: usize,
    /// RNG stream of each sequence.
    pub lanes: Vec<u64>,
    /// Predictor calls spent by each sequence on the last decoded block.
    pub calls: Vec<usize>,
}

impl DecodeState {
    /// Fresh rows `[BOS, MASK..]`, lane `i` for sequence `i`.
    pub fn fresh(cfg: &DecodeConfig) -> Self {
        let mut row = vec![MASK; cfg.length];
        row[0] = BOS;
        Self::from_rows(vec![row; cfg.batch], (0..cfg.batch as u64).collect(), 0)
    }

    pub fn from_rows(rows: Vec<Vec<TokenId>>, lanes: Vec<u64>, block: usize) -> Self {
        let n = rows.len();
        let done = rows.iter().map(|r| r.contains(&EOS)).collect();
        Self { rows, times: vec![1.0; n], done, block, lanes, calls: vec![0; n] }
    }

    pub fn masked_count(&self, i: usize) -> usize {
        self.rows[i].iter().filter(|&&t| t == MASK).count()
    }
}

/// Resolves every masked position of `state.block` in each unfinished row
/// and advances to the next block.
pub fn decode_block(
    state: &mut DecodeState,
    params: &PredictorParams,
    cfg: &DecodeConfig,
) -> Result<(), DecodeError> {
    let frag = cfg.validate()?;
    if cfg.budget < cfg.block {
        return Err(DecodeError::BudgetExhausted { needed: cfg.block, budget: cfg.budget });
    }
    let b = state.block;
    for i in 0..state.rows.len() {
        state.calls[i] = 0;
        if state.done[i] {
            continue;
        }
        state.times[i] = 1.0;
        let calls = decode_row_block(state, i, params, cfg, frag, b)?;
        assert!(calls <= cfg.budget);
        state.calls[i] = calls;
    }
    state.block += 1;
    Ok(())
}

fn decode_row_block(
    state: &mut DecodeState,
    i: usize,
    params: &PredictorParams,
    cfg: &DecodeConfig,
    frag: FragmentConfig,
    b: usize,
) -> Result<usize, DecodeError> {
    let range = frag.block_range(b);
    let start = range.start;
    let ctx_start = start.saturating_sub(cfg.window);
    let lane = state.lanes[i];
    let row = &mut state.rows[i];
    let mut scorer = BlockScorer::new(params, &row[ctx_start..start], &row[range.clone()])?;
    let v = params.vocab_size;
    let mut table = ProbTable { rows: cfg.block, vocab: v, probs: vec![0.0; cfg.block * v] };
    let mut step = 0;
    loop {
        let masked: Vec<usize> = (0..cfg.block).filter(|&j| row[start + j] == MASK).collect();
        if masked.is_empty() {
            break;
        }
        let u = keyed_uniform(cfg.seed, lane, decode_counter(b, step, Purpose::FirstHitting));
        let t = first_hitting_step(state.times[i], masked.len(), u)?;
        debug_assert!(t < state.times[i]);
        state.times[i] = t;

        for &j in &masked {
            // once finished, holes before the end token cannot end the molecule again
            let mut excluded = vec![MASK, BOS];
            if state.done[i] {
                excluded.extend([EOS, PAD]);
            }
            let mut probs = scorer.probs(j, cfg.sampling, &excluded);
            let pad = std::mem::take(&mut probs[PAD as usize]);
            probs[EOS as usize] += pad;
            table.probs[j * v..(j + 1) * v].copy_from_slice(&probs);
        }
        let (j, greedy_v, _) = gcd_select(&table, &masked)?;
        let tok = match cfg.choice {
            TokenChoice::Greedy => greedy_v,
            TokenChoice::Sample => {
                let u = keyed_uniform(cfg.seed, lane, decode_counter(b, step, Purpose::Token));
                draw_from(table.row(j), u)
            }
        };
        step += 1;
        row[start + j] = tok;
        if tok == EOS {
            // everything after the end token is frozen to EOS, revealed or not
            for slot in &mut row[start + j + 1..] {
                *slot = EOS;
            }
            state.done[i] = true;
            scorer = BlockScorer::new(params, &row[ctx_start..start], &row[range.clone()])?;
        } else {
            scorer.reveal(j, tok);
        }
    }
    Ok(step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    /// Full padded row including BOS and end tokens.
    pub ids: Vec<TokenId>,
    /// Molecule tokens between BOS and the first end token.
    pub body: Vec<TokenId>,
    /// Every position was resolved.
    pub completed: bool,
    /// An end token was emitted.
    pub terminated: bool,
    pub blocks: usize,
}

fn start_state(cfg: &DecodeConfig, prefix: Option<&[TokenId]>, lanes: Range<u64>) -> Result<DecodeState, DecodeError> {
    let mut row = vec![MASK; cfg.length];
    row[0] = BOS;
    let mut block = 0;
    if let Some(p) = prefix {
        if p.len() + 1 >= cfg.length {
            return Err(DecodeError::PrefixTooLong(p.len()));
        }
        row[1..1 + p.len()].copy_from_slice(p);
        block = (1 + p.len()) / cfg.block;
    }
    let n = (lanes.end - lanes.start) as usize;
    Ok(DecodeState::from_rows(vec![row; n], lanes.collect(), block))
}

/// Runs block decoding over a fresh batch, or completes `prefix` (body tokens
/// without BOS) in every row. A budget below the block length leaves every
/// sequence incomplete rather than failing.
pub fn generate(
    params: &PredictorParams,
    cfg: &DecodeConfig,
    prefix: Option<&[TokenId]>,
) -> Result<Vec<Generated>, DecodeError> {
    let mut state = start_state(cfg, prefix, 0..cfg.batch as u64)?;
    run_to_end(&mut state, params, cfg)
}

/// [`generate`] with the batch split into contiguous lane ranges across
/// `workers` threads. Output does not depend on the worker count.
pub fn generate_parallel(
    params: &PredictorParams,
    cfg: &DecodeConfig,
    prefix: Option<&[TokenId]>,
    workers: usize,
) -> Result<Vec<Generated>, DecodeError> {
    let n = cfg.batch as u64;
    let workers = (workers.max(1) as u64).min(n.max(1));
    if workers <= 1 {
        return generate(params, cfg, prefix);
    }
    let chunk = n.div_ceil(workers);
    let parts: Vec<Result<Vec<Generated>, DecodeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk as usize)
            .map(|lo| {
                let lanes = lo..(lo + chunk).min(n);
                scope.spawn(move || {
                    let mut state = start_state(cfg, prefix, lanes)?;
                    run_to_end(&mut state, params, cfg)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("decode worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(cfg.batch);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Decodes blocks from `state.block` until every row is done or the block
/// limit is reached.
pub fn run_to_end(
    state: &mut DecodeState,
    params: &PredictorParams,
    cfg: &DecodeConfig,
) -> Result<Vec<Generated>, DecodeError> {
    let frag = cfg.validate()?;
    let limit = cfg.block_limit(frag);
    while state.block < limit && !state.done.iter().all(|&d| d) {
        match decode_block(state, params, cfg) {
            Ok(()) => {}
            Err(DecodeError::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(state
        .rows
        .iter()
        .map(|ids| Generated {
            body: strip_controls(ids),
            completed: !ids.contains(&MASK),
            terminated: ids.contains(&EOS),
            blocks: ids.iter().position(|&t| t == EOS).map_or(state.block, |p| p / cfg.block + 1),
            ids: ids.clone(),
        })
        .collect())
}
