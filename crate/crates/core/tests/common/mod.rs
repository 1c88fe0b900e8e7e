#![allow(dead_code)]

use blockmol::chem::tokenize;
use blockmol::diffusion::{train, PredictorParams, TrainOptions};
use blockmol::fragment::{pad_and_partition, BlockTensor, FragmentConfig};
use blockmol::toy::toy_corpus;
use blockmol::vocab::Vocab;

pub struct Model {
    pub corpus: Vec<String>,
    pub vocab: Vocab,
    pub tensors: Vec<BlockTensor>,
    pub params: PredictorParams,
}

pub fn encode_corpus(corpus: &[String], frag: FragmentConfig) -> (Vocab, Vec<BlockTensor>) {
    let seqs: Vec<_> = corpus.iter().map(|s| tokenize(s).unwrap()).collect();
    let vocab = Vocab::from_corpus(seqs.iter());
    let tensors = seqs.iter().map(|t| pad_and_partition(&vocab.encode(t).unwrap(), frag).unwrap()).collect();
    (vocab, tensors)
}

/// Toy corpus of `n` molecules in 72-slot rows of 8-token blocks, trained for `epochs`.
pub fn toy_model(n: usize, epochs: usize, seed: u64) -> Model {
    let (corpus, _) = toy_corpus(n, 70, seed);
    let (vocab, tensors) = encode_corpus(&corpus, FragmentConfig::new(72, 8).unwrap());
    let opts = TrainOptions { epochs, seed, ..TrainOptions::default() };
    let params = train(&tensors, vocab.len(), &opts).unwrap().params;
    Model { corpus, vocab, tensors, params }
}
