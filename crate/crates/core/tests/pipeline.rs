mod common;

use blockmol::chem::parse_smiles;
use blockmol::decode::{generate, DecodeConfig, TokenChoice};
use blockmol::diffusion::{nelbo_loss, Checkpoint, TrainOptions, train};
use blockmol::fragment::FragmentConfig;
use blockmol::metrics::standard_metrics;
use blockmol::oracle::{builtin_profile, SurrogateOracle};
use blockmol::search::GateConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn train_save_load_sample_evaluate() {
    let model = common::toy_model(150, 4, 11);
    let frag = FragmentConfig::new(72, 8).unwrap();
    let ckpt = Checkpoint::new(model.vocab.clone(), frag, model.params.clone(), 11, vec![]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, ckpt);

    let cfg = DecodeConfig { batch: 40, choice: TokenChoice::Sample, seed: 5, ..DecodeConfig::default() };
    let a = generate(&model.params, &cfg, None).unwrap();
    let b = generate(&loaded.params, &cfg, None).unwrap();
    assert_eq!(a, b);

    let smiles: Vec<String> = a.iter().map(|g| loaded.vocab.decode(&g.body).unwrap()).collect();
    let valid = smiles.iter().filter(|s| parse_smiles(s).is_ok()).count();
    let mut oracle = SurrogateOracle::new(builtin_profile("jak2").unwrap());
    let report = standard_metrics(&smiles, &mut oracle, -9.1, &GateConfig::default()).unwrap();
    assert_eq!(report.total, 40);
    assert_eq!(report.validity, valid as f64 / 40.0);
    assert!((0.0..=1.0).contains(&report.diversity));
}

#[test]
fn prefix_completion_keeps_prefix_text() {
    let model = common::toy_model(150, 4, 11);
    let prefix = model.vocab.encode_smiles("O=C(").unwrap();
    let cfg = DecodeConfig { batch: 20, choice: TokenChoice::Sample, ..DecodeConfig::default() };
    for g in generate(&model.params, &cfg, Some(&prefix)).unwrap() {
        assert!(model.vocab.decode(&g.body).unwrap().starts_with("O=C("));
    }
}

#[test]
fn training_lowers_the_loss() {
    let model = common::toy_model(150, 0, 2);
    let opts = TrainOptions { epochs: 5, seed: 2, ..TrainOptions::default() };
    let trained = train(&model.tensors, model.vocab.len(), &opts).unwrap().params;
    let eval = |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        model.tensors.iter().map(|bt| nelbo_loss(p, bt, &mut rng).unwrap().nelbo).sum::<f64>()
    };
    assert!(eval(&trained) < eval(&model.params));
}
