//! Mini-batch SGD on the NELBO.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_gradient, NoiseDraw};
use super::predictor::PredictorParams;
use super::DiffusionError;
use crate::fragment::BlockTensor;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dim: usize,
    /// Gain window; `None` uses the padded length.
    pub window: Option<usize>,
    pub init_scale: f64,
    /// Batch gradients with a larger L2 norm are rescaled to this norm.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 4,
            dim: 32,
            window: None,
            init_scale: 0.1,
            clip_norm: 5.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: PredictorParams,
    /// Mean per-example NELBO of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train(corpus: &[BlockTensor], vocab_size: usize, opts: &TrainOptions) -> Result<TrainReport, DiffusionError> {
    let first = corpus.first().ok_or(DiffusionError::EmptyCorpus)?;
    let window = opts.window.unwrap_or(first.config().length());
    let params = PredictorParams::random(vocab_size, opts.dim, window, opts.init_scale, derive_seed(opts.seed, 1, 0));
    train_from(params, corpus, opts)
}

pub fn train_from(
    mut params: PredictorParams,
    corpus: &[BlockTensor],
    opts: &TrainOptions,
) -> Result<TrainReport, DiffusionError> {
    let first = corpus.first().ok_or(DiffusionError::EmptyCorpus)?;
    let cfg = first.config();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 2, 0));
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut prev: Option<NoiseDraw> = None;
        for batch in order.chunks(opts.batch_size.max(1)) {
            let mut grad = params.zeros_like();
            for &idx in batch {
                let bt = &corpus[idx];
                if bt.config() != cfg {
                    return Err(crate::fragment::FragmentError::LengthMismatch {
                        actual: bt.config().length(),
                        length: cfg.length(),
                    }
                    .into());
                }
                // consecutive examples share mirrored times
                let draw = match prev.take() {
                    Some(p) => p.antithetic(cfg, &mut rng),
                    None => {
                        let d = NoiseDraw::sample(cfg, &mut rng);
                        prev = Some(d.clone());
                        d
                    }
                };
                let (report, g) = loss_and_gradient(&params, bt, &draw)?;
                total += report.nelbo;
                grad.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            let norm = grad.norm();
            if norm > opts.clip_norm {
                grad.scale(opts.clip_norm / norm);
            }
            params.add_scaled(&grad, -opts.learning_rate);
        }
        epoch_losses.push(total / corpus.len() as f64);
    }
    Ok(TrainReport { params, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragment::{pad_and_partition, FragmentConfig};

    fn corpus() -> Vec<BlockTensor> {
        let cfg = FragmentConfig::new(8, 4).unwrap();
        let seqs: [&[u32]; 4] = [&[4, 4, 5], &[4, 5, 4, 6], &[6, 4, 4], &[5, 5]];
        seqs.iter().map(|s| pad_and_partition(s, cfg).unwrap()).collect()
    }

    #[test]
    fn loss_decreases_and_is_reproducible() {
        let opts = TrainOptions { epochs: 60, batch_size: 2, dim: 8, learning_rate: 0.1, ..Default::default() };
        let a = train(&corpus(), 7, &opts).unwrap();
        let b = train(&corpus(), 7, &opts).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.params, b.params);
        let head: f64 = a.epoch_losses[..10].iter().sum();
        let tail: f64 = a.epoch_losses[50..].iter().sum();
        assert!(tail < head, "head {head} tail {tail}");
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(train(&[], 7, &TrainOptions::default()).unwrap_err(), DiffusionError::EmptyCorpus);
    }
}
