//! Quick built-in checks of worked examples across the modules, run by the
//! `selftest` subcommand.

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::chem::{descriptors, fingerprint, parse_smiles, tanimoto, tokenize, Fingerprint, DEFAULT_WIDTH};
use crate::curate::{curate_stream, CurationConfig};
use crate::decode::{first_hitting_step, gcd_select};
use crate::diffusion::{build_infer_mask, build_train_mask, predict, NoiseSchedule, PredictorParams, ProbTable, Sampling};
use crate::fragment::{pad_and_partition, reassemble, FragmentConfig, FragmentError};
use crate::metrics::circles;
use crate::oracle::{builtin_profile, surrogate_ds, surrogate_qed, surrogate_sa, PropertyRecord};
use crate::search::{adaptive_cap, backpropagate, uct_score, GateConfig, SearchTree};
use crate::vocab::{BOS, EOS, PAD};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

type Check = (&'static str, fn() -> bool);

const CHECKS: &[Check] = &[
    ("tokenize benzene into 8 tokens", || tokenize("c1ccccc1").is_ok_and(|t| t.len() == 8)),
    ("two-letter chlorine token", || tokenize("CCl").is_ok_and(|t| t.texts() == ["C", "Cl"])),
    ("carbon dioxide parses", || parse_smiles("O=C=O").is_ok()),
    ("unclosed ring rejected", || parse_smiles("C1CC").is_err()),
    ("benzene descriptors", || {
        let d = descriptors(&parse_smiles("c1ccccc1").unwrap());
        (d.heavy_atoms, d.ring_count, d.max_ring_size) == (6, 1, 6)
    }),
    ("ethanol donor count", || {
        let d = descriptors(&parse_smiles("CCO").unwrap());
        (d.heavy_atoms, d.ring_count, d.hbd_proxy) == (3, 0, 1)
    }),
    ("tanimoto of overlapping bit sets", || {
        let a = Fingerprint::from_bits(64, [1, 2, 3]);
        let b = Fingerprint::from_bits(64, [2, 3, 4]);
        tanimoto(&a, &b) == Ok(0.5)
    }),
    ("distinct atoms have distinct fingerprints", || {
        let c = fingerprint(&parse_smiles("C").unwrap(), DEFAULT_WIDTH).unwrap();
        let n = fingerprint(&parse_smiles("N").unwrap(), DEFAULT_WIDTH).unwrap();
        tanimoto(&c, &n).unwrap() < 1.0
    }),
    ("empty molecule pads to one block", || {
        let cfg = FragmentConfig::new(8, 8).unwrap();
        pad_and_partition(&[], cfg).is_ok_and(|bt| bt.ids() == [BOS, EOS, PAD, PAD, PAD, PAD, PAD, PAD])
    }),
    ("71 tokens overflow a 72 slot row", || {
        let cfg = FragmentConfig::new(72, 8).unwrap();
        matches!(pad_and_partition(&[5; 71], cfg), Err(FragmentError::TooLong { .. }))
    }),
    ("partition round trip", || {
        let cfg = FragmentConfig::new(16, 4).unwrap();
        let x = [4, 5, 6, 7, 8, 9];
        pad_and_partition(&x, cfg).and_then(|bt| reassemble(&bt)).is_ok_and(|y| y == x)
    }),
    ("linear schedule weights", || {
        let s = NoiseSchedule::Linear;
        let w = |t| s.eval(t).unwrap().weight;
        s.eval(1.0).unwrap().alpha == 0.0 && w(1.0) == 1.0 && w(0.5) == 2.0 && w(0.25) == 4.0
    }),
    ("training mask for a single block", || {
        let m = build_train_mask(FragmentConfig::new(4, 4).unwrap());
        (0..4).all(|i| (0..4).all(|j| m.get(i, j))) && (0..4).all(|i| (4..8).all(|j| !m.get(i, j)))
    }),
    ("inference mask is block by window", || {
        let m = build_infer_mask(24, 8);
        (m.rows(), m.cols()) == (8, 24)
    }),
    ("zero weights predict uniformly", || {
        let p = PredictorParams::zeros(6, 4, 8);
        let t = predict(&p, &[3, 3], &[1], 0.5, Sampling::default()).unwrap();
        t.probs.iter().all(|&x| close(x, 1.0 / 6.0, 1e-15))
    }),
    ("first hitting examples", || {
        first_hitting_step(1.0, 1, 0.5) == Ok(0.5) && first_hitting_step(1.0, 4, 0.0625) == Ok(0.5)
    }),
    ("confidence picks the peaked position", || {
        let mut probs = vec![0.2; 4 * 3];
        for j in 0..4 {
            probs[j * 3] = 0.6;
        }
        probs[3 * 3] = 0.99;
        let t = ProbTable { rows: 4, vocab: 3, probs };
        gcd_select(&t, &[0, 1, 2, 3]).is_ok_and(|(j, _, _)| j == 3)
    }),
    ("uct boundaries", || {
        let mut tree = SearchTree::new(20);
        let c = tree.add_child(0, vec![1], 8);
        let n = &mut tree.nodes[c];
        (n.visits, n.mean, n.max) = (1, 1.0, 2.0);
        let n = &tree.nodes[c];
        uct_score(n, 1, 0.5, 2.1) == Ok(1.5)
            && uct_score(n, 1, 0.0, 0.0) == Ok(2.0)
            && close(uct_score(n, 8, 1.0, 2.1).unwrap(), 1.0 + 2.1 * 8f64.ln().sqrt(), 1e-12)
    }),
    ("adaptive width clamps", || {
        let mut tree = SearchTree::new(20);
        let c = tree.add_child(0, vec![1], 8);
        tree.nodes[c].visits = 1;
        tree.nodes[c].mean = 4.7;
        let mid = adaptive_cap(&tree, 0, 2.0, 8, 10);
        tree.nodes[c].mean = 100.0;
        let high = adaptive_cap(&tree, 0, 2.0, 8, 10);
        tree.nodes[c].mean = 0.0;
        let low = adaptive_cap(&tree, 0, 2.0, 8, 10);
        (mid, high, low) == (Some(9), Some(10), Some(8))
    }),
    ("backpropagation running mean", || {
        let mut tree = SearchTree::new(20);
        backpropagate(&mut tree, &[0], 1.0);
        backpropagate(&mut tree, &[0], 3.0);
        let r = &tree.nodes[0];
        (r.visits, r.mean, r.max) == (2, 2.0, 3.0)
    }),
    ("gate reward", || {
        let gate = GateConfig::default();
        gate.reward(&PropertyRecord { qed: 0.6, sa: 4.0, ds: -9.2 }) == 9.2
            && gate.reward(&PropertyRecord { qed: 0.4, sa: 4.0, ds: -9.2 }) == gate.penalty
    }),
    ("surrogate scores", || {
        let single = descriptors(&parse_smiles("C").unwrap());
        let chain = descriptors(&parse_smiles("CCCCCCCCCC").unwrap());
        let mut d = single.clone();
        (d.approx_mw, d.logp_proxy, d.hbd_proxy, d.ring_count) = (600.0, 2.0, 1, 2);
        close(surrogate_sa(&single), 1.15, 1e-12)
            && close(surrogate_sa(&chain), 2.5, 1e-12)
            && close(surrogate_qed(&d), (-1.0f64).exp(), 1e-12)
    }),
    ("docking surrogate minimum", || {
        let profile = builtin_profile("parp1").unwrap();
        let mol = parse_smiles(&profile.seed_smiles).unwrap();
        let mut d = descriptors(&mol);
        d.heavy_atoms = profile.size_optimum;
        let fp = fingerprint(&mol, profile.target_fp.width()).unwrap();
        close(surrogate_ds(&fp, &d, &profile).unwrap(), -18.0, 1e-12)
    }),
    ("circles extremes", || {
        let a = Fingerprint::from_bits(64, [1]);
        let b = Fingerprint::from_bits(64, [2]);
        circles(&[&a, &a, &a], 0.75) == Ok(1) && circles(&[&a, &b], 0.75) == Ok(2)
    }),
    ("duplicate rejected by diversity", || {
        let m = "Cc1ccc(NC(=O)C2CCNCC2)cc1";
        curate_stream([m, m], &CurationConfig::default()).0.len() == 1
    }),
];

/// Runs every check, turning a panic into a failure.
pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| CheckOutcome { name, passed: catch_unwind(AssertUnwindSafe(check)).unwrap_or(false) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let failed: Vec<_> = run_selftest().into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }
}
