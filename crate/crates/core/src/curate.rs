//! Four-stage corpus curation: physicochemical, structural and Lipinski
//! filters, then diversity-aware admission per heavy-atom bucket.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chem::{
    descriptors, fingerprint, parse_validate, tanimoto, tokenize, BondOrder, DescriptorSet, Fingerprint, ParsedMol,
    TokenSeq, DEFAULT_WIDTH,
};
use crate::oracle::{surrogate_qed, surrogate_sa};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub qed_min: f64,
    pub sa_max: f64,
    pub tpsa_max: f64,
    pub mw_range: (f64, f64),
    pub logp_max: f64,
    pub hbd_max: usize,
    pub hba_max: usize,
    pub rot_max: usize,
    pub max_ring: usize,
    pub bridgehead_max: usize,
    pub heavy_range: (usize, usize),
    pub tanimoto_max: f64,
    pub banned_elements: Vec<String>,
    /// SMILES fragments matched as contiguous token runs.
    pub banned_patterns: Vec<String>,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            qed_min: 0.5,
            sa_max: 5.0,
            tpsa_max: 140.0,
            mw_range: (100.0, 500.0),
            logp_max: 5.0,
            hbd_max: 5,
            hba_max: 10,
            rot_max: 10,
            max_ring: 8,
            bridgehead_max: 2,
            heavy_range: (4, 49),
            tanimoto_max: 0.5,
            banned_elements: vec!["Si".into(), "Sn".into()],
            banned_patterns: ["N=N", "OO", "SS", "C(=O)Cl"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Physchem,
    Structural,
    Lipinski,
    Diversity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Qed,
    Sa,
    BannedElement,
    Charge,
    Radical,
    Bridgehead,
    MaxRing,
    RotBonds,
    Tpsa,
    BannedPattern,
    Phosphorus,
    LogP,
    Mw,
    Hbd,
    Hba,
    HeavyAtomRange,
    Similarity,
}

impl Rule {
    pub fn stage(self) -> Stage {
        use Rule::*;
        match self {
            Qed | Sa => Stage::Physchem,
            BannedElement | Charge | Radical | Bridgehead | MaxRing | RotBonds | Tpsa | BannedPattern | Phosphorus => {
                Stage::Structural
            }
            LogP | Mw | Hbd | Hba => Stage::Lipinski,
            HeavyAtomRange | Similarity => Stage::Diversity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject(Stage, Rule),
}

fn reject(rule: Rule) -> Verdict {
    Verdict::Reject(rule.stage(), rule)
}

fn contains_run(hay: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn phosphorus_ok(mol: &ParsedMol) -> bool {
    (0..mol.atoms.len()).filter(|&i| mol.atoms[i].symbol() == "P").all(|p| {
        mol.bonds.iter().any(|b| {
            let other = if b.a == p { b.b } else if b.b == p { b.a } else { return false };
            b.order == BondOrder::Double && mol.atoms[other].symbol() == "O"
        })
    })
}

/// Stages one to three, first violation wins, in pipeline order.
pub fn classify(
    mol: &ParsedMol,
    tokens: &TokenSeq,
    d: &DescriptorSet,
    qed: f64,
    sa: f64,
    cfg: &CurationConfig,
) -> Verdict {
    if qed <= cfg.qed_min {
        return reject(Rule::Qed);
    }
    if sa >= cfg.sa_max {
        return reject(Rule::Sa);
    }

    if d.element_set.iter().any(|e| cfg.banned_elements.contains(e)) {
        return reject(Rule::BannedElement);
    }
    if d.charge_total != 0 {
        return reject(Rule::Charge);
    }
    if d.radical_flag {
        return reject(Rule::Radical);
    }
    if d.bridgehead_count > cfg.bridgehead_max {
        return reject(Rule::Bridgehead);
    }
    if d.max_ring_size > cfg.max_ring {
        return reject(Rule::MaxRing);
    }
    if d.rotatable_proxy > cfg.rot_max {
        return reject(Rule::RotBonds);
    }
    if d.tpsa_proxy > cfg.tpsa_max {
        return reject(Rule::Tpsa);
    }
    let texts = tokens.texts();
    let banned = cfg.banned_patterns.iter().any(|p| match tokenize(p) {
        Ok(pt) => contains_run(&texts, &pt.texts()),
        Err(_) => false,
    });
    if banned {
        return reject(Rule::BannedPattern);
    }
    if !phosphorus_ok(mol) {
        return reject(Rule::Phosphorus);
    }

    if d.logp_proxy > cfg.logp_max {
        return reject(Rule::LogP);
    }
    if d.approx_mw < cfg.mw_range.0 || d.approx_mw > cfg.mw_range.1 {
        return reject(Rule::Mw);
    }
    if d.hbd_proxy > cfg.hbd_max {
        return reject(Rule::Hbd);
    }
    if d.hba_proxy > cfg.hba_max {
        return reject(Rule::Hba);
    }
    Verdict::Accept
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_count: usize,
    pub accepted_count: usize,
    pub parse_failures: usize,
    pub rejections: BTreeMap<Stage, usize>,
    pub rule_counts: BTreeMap<Rule, usize>,
    /// Heavy-atom count outside the bucket range; included in the
    /// diversity rejections.
    pub bucket_misses: usize,
    /// Admitted molecules per heavy-atom count.
    pub buckets: BTreeMap<usize, usize>,
}

impl CurationReport {
    pub fn total_rejected(&self) -> usize {
        self.rejections.values().sum()
    }

    fn record(&mut self, rule: Rule) {
        *self.rejections.entry(rule.stage()).or_default() += 1;
        *self.rule_counts.entry(rule).or_default() += 1;
    }
}

/// Runs the full pipeline over SMILES lines and returns the admitted
/// molecules in input order.
pub fn curate_stream<'a>(
    input: impl IntoIterator<Item = &'a str>,
    cfg: &CurationConfig,
) -> (Vec<String>, CurationReport) {
    let mut report = CurationReport::default();
    for stage in [Stage::Physchem, Stage::Structural, Stage::Lipinski, Stage::Diversity] {
        report.rejections.insert(stage, 0);
    }
    let mut buckets: BTreeMap<usize, Vec<Fingerprint>> = BTreeMap::new();
    let mut out = Vec::new();
    for smiles in input {
        report.input_count += 1;
        let parsed = tokenize(smiles).ok().and_then(|t| parse_validate(&t).ok().map(|m| (t, m)));
        let Some((tokens, mol)) = parsed else {
            report.parse_failures += 1;
            continue;
        };
        let d = descriptors(&mol);
        if let Verdict::Reject(_, rule) = classify(&mol, &tokens, &d, surrogate_qed(&d), surrogate_sa(&d), cfg) {
            report.record(rule);
            continue;
        }
        let h = d.heavy_atoms;
        if h < cfg.heavy_range.0 || h > cfg.heavy_range.1 {
            report.bucket_misses += 1;
            report.record(Rule::HeavyAtomRange);
            continue;
        }
        let fp = fingerprint(&mol, DEFAULT_WIDTH).expect("default width is valid");
        let bucket = buckets.entry(h).or_default();
        let too_close = bucket.iter().any(|other| tanimoto(&fp, other).expect("same width") >= cfg.tanimoto_max);
        if too_close {
            report.record(Rule::Similarity);
            continue;
        }
        bucket.push(fp);
        *report.buckets.entry(h).or_default() += 1;
        report.accepted_count += 1;
        out.push(smiles.to_string());
    }
    (out, report)
}
