//! Block-wise NELBO under the training attention mask, and its gradient.

use rand::Rng;

use super::mask::build_train_mask;
use super::predictor::{adjust_logits, PredictorParams, Sampling};
use super::schedule::{NoiseSchedule, T_MIN};
use super::DiffusionError;
use crate::fragment::{BlockTensor, FragmentConfig};
use crate::vocab::{TokenId, MASK};

/// Per-block times and per-position mask coins for one training example.
/// Position 0 holds BOS and is never masked.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub times: Vec<f64>,
    pub masked: Vec<bool>,
}

fn clip_time(t: f64) -> f64 {
    t.clamp(T_MIN, 1.0)
}

impl NoiseDraw {
    pub fn sample<R: Rng + ?Sized>(cfg: FragmentConfig, rng: &mut R) -> Self {
        let times: Vec<f64> = (0..cfg.blocks()).map(|_| clip_time(1.0 - rng.random::<f64>())).collect();
        Self::with_times(cfg, times, rng)
    }

    pub fn with_times<R: Rng + ?Sized>(cfg: FragmentConfig, times: Vec<f64>, rng: &mut R) -> Self {
        assert_eq!(times.len(), cfg.blocks());
        let schedule = NoiseSchedule::Linear;
        let mut masked = vec![false; cfg.length()];
        for (b, &t) in times.iter().enumerate() {
            let p = schedule.mask_prob(t);
            for pos in cfg.block_range(b) {
                let coin = rng.random::<f64>();
                masked[pos] = pos != 0 && coin < p;
            }
        }
        Self { times, masked }
    }

    /// Partner draw at times `1 - t`, for variance reduction across a pair
    /// of examples.
    pub fn antithetic<R: Rng + ?Sized>(&self, cfg: FragmentConfig, rng: &mut R) -> Self {
        let times = self.times.iter().map(|t| clip_time(1.0 - t)).collect();
        Self::with_times(cfg, times, rng)
    }

    pub fn noised(&self, ids: &[TokenId]) -> Vec<TokenId> {
        ids.iter().zip(&self.masked).map(|(&t, &m)| if m { MASK } else { t }).collect()
    }
}

/// Replaces each token independently with MASK with probability `1 - alpha(t)`.
pub fn forward_mask<R: Rng + ?Sized>(
    block: &[TokenId],
    t: f64,
    rng: &mut R,
) -> Result<Vec<TokenId>, DiffusionError> {
    let p = NoiseSchedule::Linear.eval(t)?;
    Ok(block.iter().map(|&tok| if rng.random::<f64>() < 1.0 - p.alpha { MASK } else { tok }).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub nelbo: f64,
    pub per_block: Vec<f64>,
    pub masked: usize,
}

fn check_inputs(params: &PredictorParams, bt: &BlockTensor, draw: &NoiseDraw) -> Result<(), DiffusionError> {
    let cfg = bt.config();
    if !bt.is_clean() {
        return Err(DiffusionError::NotClean);
    }
    if draw.times.len() != cfg.blocks() || draw.masked.len() != cfg.length() {
        return Err(crate::fragment::FragmentError::LengthMismatch {
            actual: draw.masked.len(),
            length: cfg.length(),
        }
        .into());
    }
    for &t in &draw.times {
        NoiseSchedule::Linear.eval(t)?;
    }
    if let Some(&t) = bt.ids().iter().find(|&&t| t as usize >= params.vocab_size) {
        return Err(DiffusionError::TokenOutOfRange(t, params.vocab_size));
    }
    Ok(())
}

/// Visible sources for noised row `i`, in summation order: clean columns
/// ascending, then unmasked noised columns ascending.
fn sources(
    mask: &super::AttentionMask,
    cfg: FragmentConfig,
    draw: &NoiseDraw,
    i: usize,
    out: &mut Vec<usize>,
) {
    let l = cfg.length();
    out.clear();
    out.extend((0..l).filter(|&k| mask.get(i, l + k)));
    out.extend((0..l).filter(|&k| mask.get(i, k) && !draw.masked[k]));
}

fn run(
    params: &PredictorParams,
    bt: &BlockTensor,
    draw: &NoiseDraw,
    mut grad: Option<&mut PredictorParams>,
) -> Result<LossReport, DiffusionError> {
    check_inputs(params, bt, draw)?;
    let cfg = bt.config();
    let mask = build_train_mask(cfg);
    let ids = bt.ids();
    let d = params.dim;
    let v = params.vocab_size;
    let mut per_block = vec![0.0; cfg.blocks()];
    let mut masked = 0;
    let mut src = Vec::with_capacity(2 * cfg.length());
    let mut h = vec![0.0; d];
    let mut dh = vec![0.0; d];
    for b in 0..cfg.blocks() {
        let weight = NoiseSchedule::Linear.eval(draw.times[b])?.weight;
        let mut block_ce = 0.0;
        for i in cfg.block_range(b) {
            if !draw.masked[i] {
                continue;
            }
            masked += 1;
            sources(&mask, cfg, draw, i, &mut src);
            h.iter_mut().for_each(|x| *x = 0.0);
            for &k in &src {
                params.accumulate(&mut h, ids[k], i, k);
            }
            let probs = adjust_logits(&params.logits(&h), Sampling::default(), &[]);
            let target = ids[i] as usize;
            block_ce += -probs[target].ln();

            if let Some(g) = grad.as_deref_mut() {
                // d(-ln p_y)/d logits = p - onehot(y)
                let mut dl = probs;
                dl[target] -= 1.0;
                dl.iter_mut().for_each(|x| *x *= weight);
                for (gb, x) in g.bias.iter_mut().zip(&dl) {
                    *gb += x;
                }
                for k in 0..d {
                    let row = &params.output[k * v..(k + 1) * v];
                    let grow = &mut g.output[k * v..(k + 1) * v];
                    let mut acc = 0.0;
                    for ((go, w), x) in grow.iter_mut().zip(row).zip(&dl) {
                        *go += h[k] * x;
                        acc += w * x;
                    }
                    dh[k] = acc;
                }
                for &k in &src {
                    let tok = ids[k] as usize;
                    let gr = params.gain_row(i as i64 - k as i64);
                    for c in 0..d {
                        let e = params.embed[tok * d + c];
                        let gn = params.gain[gr * d + c];
                        g.embed[tok * d + c] += dh[c] * gn;
                        g.gain[gr * d + c] += dh[c] * e;
                    }
                }
            }
        }
        per_block[b] = weight * block_ce;
    }
    Ok(LossReport { nelbo: per_block.iter().sum(), per_block, masked })
}

/// Weighted masked cross-entropy summed over blocks, computed for all
/// blocks at once through the training mask.
pub fn nelbo(params: &PredictorParams, bt: &BlockTensor, draw: &NoiseDraw) -> Result<LossReport, DiffusionError> {
    run(params, bt, draw, None)
}

/// [`nelbo`] together with its exact gradient.
pub fn loss_and_gradient(
    params: &PredictorParams,
    bt: &BlockTensor,
    draw: &NoiseDraw,
) -> Result<(LossReport, PredictorParams), DiffusionError> {
    let mut g = params.zeros_like();
    let report = run(params, bt, draw, Some(&mut g))?;
    Ok((report, g))
}

/// [`nelbo`] under a freshly sampled noise draw.
pub fn nelbo_loss<R: Rng + ?Sized>(
    params: &PredictorParams,
    bt: &BlockTensor,
    rng: &mut R,
) -> Result<LossReport, DiffusionError> {
    nelbo(params, bt, &NoiseDraw::sample(bt.config(), rng))
}

/// Gradient of [`nelbo_loss`] for the same draw the loss would use.
pub fn loss_gradient<R: Rng + ?Sized>(
    params: &PredictorParams,
    bt: &BlockTensor,
    rng: &mut R,
) -> Result<PredictorParams, DiffusionError> {
    Ok(loss_and_gradient(params, bt, &NoiseDraw::sample(bt.config(), rng))?.1)
}
