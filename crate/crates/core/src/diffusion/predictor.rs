//! Reference denoiser: a position-gated bag of embeddings followed by a
//! linear readout. Each masked slot sums the embeddings of every visible
//! token scaled elementwise by a gain that depends on the clamped relative
//! offset, so it sees the whole clean context plus the revealed part of its
//! own block and nothing else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiffusionError;
use crate::vocab::{TokenId, MASK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub vocab_size: usize,
    pub dim: usize,
    /// Relative offsets are clamped to `[-window, window]`.
    pub window: usize,
    /// `vocab_size x dim`
    pub embed: Vec<f64>,
    /// `(2 * window + 1) x dim`
    pub gain: Vec<f64>,
    /// `dim x vocab_size`
    pub output: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PredictorParams {
    pub fn zeros(vocab_size: usize, dim: usize, window: usize) -> Self {
        Self {
            vocab_size,
            dim,
            window,
            embed: vec![0.0; vocab_size * dim],
            gain: vec![0.0; (2 * window + 1) * dim],
            output: vec![0.0; dim * vocab_size],
            bias: vec![0.0; vocab_size],
        }
    }

    /// Small uniform init; gains start near one so every offset contributes.
    pub fn random(vocab_size: usize, dim: usize, window: usize, scale: f64, seed: u64) -> Self {
        let mut p = Self::zeros(vocab_size, dim, window);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |s: f64| (rng.random::<f64>() * 2.0 - 1.0) * s;
        for x in &mut p.embed {
            *x = u(scale);
        }
        for x in &mut p.gain {
            *x = 1.0 + u(scale);
        }
        for x in &mut p.output {
            *x = u(scale);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab_size, self.dim, self.window)
    }

    pub fn num_params(&self) -> usize {
        self.embed.len() + self.gain.len() + self.output.len() + self.bias.len()
    }

    fn segments(&self) -> [&Vec<f64>; 4] {
        [&self.embed, &self.gain, &self.output, &self.bias]
    }

    fn segments_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.embed, &mut self.gain, &mut self.output, &mut self.bias]
    }

    /// Flat view across all tables, in declaration order.
    pub fn get(&self, mut i: usize) -> f64 {
        for s in self.segments() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set(&mut self, mut i: usize, value: f64) {
        for s in self.segments_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments().into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.segments_mut().into_iter().zip(other.segments()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.segments_mut() {
            for x in s.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub(crate) fn gain_row(&self, rel: i64) -> usize {
        let w = self.window as i64;
        (rel.clamp(-w, w) + w) as usize
    }

    /// `h += embed[token] * gain[target - source]`
    pub(crate) fn accumulate(&self, h: &mut [f64], token: TokenId, target: usize, source: usize) {
        let d = self.dim;
        let e = &self.embed[token as usize * d..(token as usize + 1) * d];
        let g0 = self.gain_row(target as i64 - source as i64) * d;
        let g = &self.gain[g0..g0 + d];
        for ((hk, ek), gk) in h.iter_mut().zip(e).zip(g) {
            *hk += ek * gk;
        }
    }

    pub(crate) fn logits(&self, h: &[f64]) -> Vec<f64> {
        let v = self.vocab_size;
        let mut out = self.bias.clone();
        for (k, &hk) in h.iter().enumerate() {
            let row = &self.output[k * v..(k + 1) * v];
            for (o, w) in out.iter_mut().zip(row) {
                *o += hk * w;
            }
        }
        out
    }

    fn check_tokens(&self, ids: &[TokenId]) -> Result<(), DiffusionError> {
        match ids.iter().find(|&&t| t as usize >= self.vocab_size) {
            Some(&t) => Err(DiffusionError::TokenOutOfRange(t, self.vocab_size)),
            None => Ok(()),
        }
    }
}

/// Temperature and nucleus mass applied to raw logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub nucleus: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { temperature: 1.0, nucleus: 1.0 }
    }
}

impl Sampling {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        let ok = self.temperature > 0.0
            && self.temperature.is_finite()
            && self.nucleus > 0.0
            && self.nucleus <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(DiffusionError::BadSampling { temperature: self.temperature, nucleus: self.nucleus })
        }
    }
}

/// Softmax of `logits / temperature` with `excluded` ids given zero mass,
/// then truncated to the smallest top set reaching the nucleus mass and
/// renormalised. Ties in the nucleus ranking go to the lower id.
pub fn adjust_logits(logits: &[f64], sampling: Sampling, excluded: &[TokenId]) -> Vec<f64> {
    let mut scaled: Vec<f64> = logits.iter().map(|l| l / sampling.temperature).collect();
    for &t in excluded {
        if let Some(x) = scaled.get_mut(t as usize) {
            *x = f64::NEG_INFINITY;
        }
    }
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    if sampling.nucleus < 1.0 {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let mut cum = 0.0;
        let mut keep = order.len();
        for (rank, &i) in order.iter().enumerate() {
            cum += probs[i];
            if cum >= sampling.nucleus {
                keep = rank + 1;
                break;
            }
        }
        for &i in &order[keep..] {
            probs[i] = 0.0;
        }
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
    }
    probs
}

/// Row-major `rows x vocab` probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    pub rows: usize,
    pub vocab: usize,
    pub probs: Vec<f64>,
}

impl ProbTable {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.probs[j * self.vocab..(j + 1) * self.vocab]
    }
}

/// Per-position token distributions for a partially masked block given a
/// clean context that immediately precedes it. Rows for already revealed
/// positions are computed the same way and callers simply ignore them.
pub fn predict(
    params: &PredictorParams,
    block: &[TokenId],
    context: &[TokenId],
    t: f64,
    sampling: Sampling,
) -> Result<ProbTable, DiffusionError> {
    predict_with_exclusions(params, block, context, t, sampling, &[])
}

pub fn predict_with_exclusions(
    params: &PredictorParams,
    block: &[TokenId],
    context: &[TokenId],
    t: f64,
    sampling: Sampling,
    excluded: &[TokenId],
) -> Result<ProbTable, DiffusionError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(DiffusionError::OutOfRange(t));
    }
    sampling.validate()?;
    if context.contains(&MASK) {
        return Err(DiffusionError::MaskInContext);
    }
    params.check_tokens(context)?;
    params.check_tokens(block)?;
    let c = context.len();
    let mut probs = Vec::with_capacity(block.len() * params.vocab_size);
    let mut h = vec![0.0; params.dim];
    for j in 0..block.len() {
        h.iter_mut().for_each(|x| *x = 0.0);
        for (k, &tok) in context.iter().enumerate() {
            params.accumulate(&mut h, tok, c + j, k);
        }
        for (k, &tok) in block.iter().enumerate() {
            if tok != MASK {
                params.accumulate(&mut h, tok, c + j, c + k);
            }
        }
        probs.extend(adjust_logits(&params.logits(&h), sampling, excluded));
    }
    Ok(ProbTable { rows: block.len(), vocab: params.vocab_size, probs })
}

/// Incremental form of [`predict`] for decoding: the context contribution
/// is summed once and each reveal adds one token's contribution to every
/// row, so a reveal costs `O(K * dim)` instead of a full recompute.
#[derive(Debug, Clone)]
pub struct BlockScorer<'a> {
    params: &'a PredictorParams,
    hidden: Vec<f64>,
    block_len: usize,
    offset: usize,
}

impl<'a> BlockScorer<'a> {
    pub fn new(
        params: &'a PredictorParams,
        context: &[TokenId],
        block: &[TokenId],
    ) -> Result<Self, DiffusionError> {
        if context.contains(&MASK) {
            return Err(DiffusionError::MaskInContext);
        }
        params.check_tokens(context)?;
        params.check_tokens(block)?;
        let c = context.len();
        let d = params.dim;
        let mut hidden = vec![0.0; block.len() * d];
        for j in 0..block.len() {
            let h = &mut hidden[j * d..(j + 1) * d];
            for (k, &tok) in context.iter().enumerate() {
                params.accumulate(h, tok, c + j, k);
            }
            for (k, &tok) in block.iter().enumerate() {
                if tok != MASK {
                    params.accumulate(h, tok, c + j, c + k);
                }
            }
        }
        Ok(Self { params, hidden, block_len: block.len(), offset: c })
    }

    /// Makes `token` at block position `pos` visible to every row.
    pub fn reveal(&mut self, pos: usize, token: TokenId) {
        let d = self.params.dim;
        for j in 0..self.block_len {
            let h = &mut self.hidden[j * d..(j + 1) * d];
            self.params.accumulate(h, token, self.offset + j, self.offset + pos);
        }
    }

    pub fn logits(&self, j: usize) -> Vec<f64> {
        let d = self.params.dim;
        self.params.logits(&self.hidden[j * d..(j + 1) * d])
    }

    pub fn probs(&self, j: usize, sampling: Sampling, excluded: &[TokenId]) -> Vec<f64> {
        adjust_logits(&self.logits(j), sampling, excluded)
    }
}
