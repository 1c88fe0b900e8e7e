//! Evaluation metrics over a set of generated SMILES.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{fingerprint, parse_smiles, tanimoto, Fingerprint, DEFAULT_WIDTH};
use crate::oracle::{Oracle, OracleError, PropertyRecord};
use crate::search::GateConfig;

pub const CIRCLES_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    EmptySet,
    #[error("circle threshold {0} outside (0, 1)")]
    BadThreshold(f64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub quality: f64,
    pub docking_filter: f64,
    pub diversity: f64,
    pub hit_ratio: f64,
    pub hit_count: usize,
    pub circles: usize,
    /// Mean docking score of the best 5% of hits; absent with no hits.
    pub novel_top_hit: Option<f64>,
}

/// A unique valid molecule with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub smiles: String,
    pub fp: Fingerprint,
    pub props: PropertyRecord,
}

/// Validity count and the unique valid molecules in first-seen order.
pub fn score_samples<S: AsRef<str>>(
    samples: &[S],
    oracle: &mut dyn Oracle,
) -> Result<(usize, Vec<Scored>), MetricsError> {
    let mut valid = 0;
    let mut seen = HashSet::new();
    let mut unique = Vec::new();
    for s in samples {
        let s = s.as_ref();
        let Ok(mol) = parse_smiles(s) else { continue };
        valid += 1;
        if !seen.insert(s.to_string()) {
            continue;
        }
        let fp = fingerprint(&mol, DEFAULT_WIDTH).expect("default width is valid");
        let props = oracle.score(s)?;
        unique.push(Scored { smiles: s.to_string(), fp, props });
    }
    Ok((valid, unique))
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One minus the mean pairwise Tanimoto similarity; zero below two molecules.
pub fn diversity(fps: &[&Fingerprint]) -> f64 {
    if fps.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            sum += tanimoto(fps[i], fps[j]).expect("same width");
            pairs += 1;
        }
    }
    1.0 - sum / pairs as f64
}

/// Greedy sphere exclusion in the given order.
pub fn circles(fps: &[&Fingerprint], threshold: f64) -> Result<usize, MetricsError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::BadThreshold(threshold));
    }
    let mut centers: Vec<&Fingerprint> = Vec::new();
    for fp in fps {
        if centers.iter().all(|c| tanimoto(fp, c).expect("same width") < threshold) {
            centers.push(fp);
        }
    }
    Ok(centers.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitSummary {
    pub hit_ratio: f64,
    pub novel_top_hit: Option<f64>,
    /// Hits sorted by docking score, best first.
    pub hits: Vec<Scored>,
}

/// Hits beat the target threshold and pass the gate strictly.
pub fn hit_metrics(unique: &[Scored], threshold_ds: f64, gate: &GateConfig) -> HitSummary {
    let mut hits: Vec<Scored> = unique
        .iter()
        .filter(|s| s.props.ds < threshold_ds && s.props.qed > gate.qed_min && s.props.sa < gate.sa_max)
        .cloned()
        .collect();
    hits.sort_by(|a, b| a.props.ds.total_cmp(&b.props.ds));
    let top = hits.len().div_ceil(20);
    let novel_top_hit = (top > 0).then(|| hits[..top].iter().map(|h| h.props.ds).sum::<f64>() / top as f64);
    HitSummary { hit_ratio: fraction(hits.len(), unique.len()), novel_top_hit, hits }
}

pub fn standard_metrics<S: AsRef<str>>(
    samples: &[S],
    oracle: &mut dyn Oracle,
    threshold_ds: f64,
    gate: &GateConfig,
) -> Result<EvalReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (valid, unique) = score_samples(samples, oracle)?;
    let quality = unique.iter().filter(|s| s.props.qed >= 0.6 && s.props.sa <= 4.0).count();
    let filtered = unique.iter().filter(|s| s.props.qed > 0.5 && s.props.sa < 5.0).count();
    let fps: Vec<&Fingerprint> = unique.iter().map(|s| &s.fp).collect();
    let hits = hit_metrics(&unique, threshold_ds, gate);
    let hit_fps: Vec<&Fingerprint> = hits.hits.iter().map(|s| &s.fp).collect();
    Ok(EvalReport {
        total: samples.len(),
        validity: fraction(valid, samples.len()),
        uniqueness: fraction(unique.len(), valid),
        quality: fraction(quality, unique.len()),
        docking_filter: fraction(filtered, unique.len()),
        diversity: diversity(&fps),
        hit_ratio: hits.hit_ratio,
        hit_count: hits.hits.len(),
        circles: circles(&hit_fps, CIRCLES_THRESHOLD)?,
        novel_top_hit: hits.novel_top_hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<(&'static str, PropertyRecord)>);

    impl Oracle for Fixed {
        fn score(&mut self, smiles: &str) -> Result<PropertyRecord, OracleError> {
            Ok(self.0.iter().find(|(s, _)| *s == smiles).map(|p| p.1).unwrap_or(PropertyRecord { qed: 0.0, sa: 10.0, ds: 0.0 }))
        }
    }

    fn rec(qed: f64, sa: f64, ds: f64) -> PropertyRecord {
        PropertyRecord { qed, sa, ds }
    }

    #[test]
    fn identical_set() {
        let samples = vec!["CCO"; 10];
        let r = standard_metrics(&samples, &mut Fixed(vec![]), -10.0, &GateConfig::default()).unwrap();
        assert_eq!((r.validity, r.uniqueness, r.diversity), (1.0, 0.1, 0.0));
    }

    #[test]
    fn one_invalid() {
        let mut samples: Vec<String> = (1..=10).map(|n| "C".repeat(n)).collect();
        samples.push("C1CC".into());
        let r = standard_metrics(&samples, &mut Fixed(vec![]), -10.0, &GateConfig::default()).unwrap();
        assert!((r.validity - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(r.novel_top_hit, None);
        assert_eq!(r.circles, 0);
    }

    #[test]
    fn empty_set() {
        let none: Vec<&str> = vec![];
        assert_eq!(standard_metrics(&none, &mut Fixed(vec![]), -10.0, &GateConfig::default()), Err(MetricsError::EmptySet));
    }

    #[test]
    fn single_hit() {
        let mut o = Fixed(vec![("CCO", rec(0.7, 3.0, -11.0))]);
        let r = standard_metrics(&["CCO"], &mut o, -10.0, &GateConfig::default()).unwrap();
        assert_eq!((r.hit_count, r.novel_top_hit, r.circles), (1, Some(-11.0), 1));
        assert_eq!((r.quality, r.docking_filter), (1.0, 1.0));
    }

    #[test]
    fn top_five_percent() {
        let fp = Fingerprint::empty(256);
        let unique: Vec<Scored> = (0..100)
            .map(|i| Scored { smiles: format!("m{i}"), fp: fp.clone(), props: rec(0.9, 2.0, -10.5 - (i * 37 % 100) as f64 / 10.0) })
            .collect();
        let h = hit_metrics(&unique, -10.0, &GateConfig::default());
        let mut ds: Vec<f64> = unique.iter().map(|s| s.props.ds).collect();
        ds.sort_by(f64::total_cmp);
        let want = ds[..5].iter().sum::<f64>() / 5.0;
        assert_eq!(h.novel_top_hit, Some(want));
        assert_eq!(h.hit_ratio, 1.0);
    }

    #[test]
    fn circle_extremes() {
        let a = Fingerprint::from_bits(256, [1, 2]);
        let same = vec![&a; 5];
        assert_eq!(circles(&same, 0.75).unwrap(), 1);
        let disjoint: Vec<Fingerprint> = (0..6).map(|i| Fingerprint::from_bits(256, [i * 2, i * 2 + 1])).collect();
        let refs: Vec<&Fingerprint> = disjoint.iter().collect();
        assert_eq!(circles(&refs, 0.75).unwrap(), 6);
        assert!(circles(&refs, 1.0).is_err());
    }
}
