use super::{Oracle, OracleError, OracleProfile, PropertyRecord};
use crate::chem::{descriptors, fingerprint, parse_smiles, tanimoto, DescriptorSet, Fingerprint, FingerprintError};

fn desirability(v: f64, mu: f64, sigma: f64) -> f64 {
    let z = (v - mu) / sigma;
    (-z * z).exp()
}

/// Geometric mean of four Gaussian desirabilities over mass, logP, donors
/// and ring count.
pub fn surrogate_qed(d: &DescriptorSet) -> f64 {
    let product = desirability(d.approx_mw, 300.0, 150.0)
        * desirability(d.logp_proxy, 2.0, 2.0)
        * desirability(d.hbd_proxy as f64, 1.0, 2.0)
        * desirability(d.ring_count as f64, 2.0, 1.5);
    product.powf(0.25)
}

pub fn surrogate_sa(d: &DescriptorSet) -> f64 {
    let raw = 1.0
        + 0.15 * d.heavy_atoms as f64
        + 0.7 * d.ring_count as f64
        + 0.5 * d.bridgehead_count as f64
        + 0.3 * (d.max_ring_size as f64 - 6.0).max(0.0);
    raw.clamp(1.0, 10.0)
}

/// Pharmacophore overlap plus a size term; lower is better, bounded below
/// by -18 at the target's own seed.
pub fn surrogate_ds(fp: &Fingerprint, d: &DescriptorSet, profile: &OracleProfile) -> Result<f64, FingerprintError> {
    let sim = tanimoto(fp, &profile.target_fp)?;
    let size = desirability(d.heavy_atoms as f64, profile.size_optimum as f64, 12.0);
    Ok(-(14.0 * sim + 4.0 * size))
}

#[derive(Debug, Clone)]
pub struct SurrogateOracle {
    pub profile: OracleProfile,
}

impl SurrogateOracle {
    pub fn new(profile: OracleProfile) -> Self {
        Self { profile }
    }

    pub fn score_smiles(&self, smiles: &str) -> Result<PropertyRecord, OracleError> {
        let mol = parse_smiles(smiles).map_err(|e| OracleError::InvalidMolecule(e.to_string()))?;
        let d = descriptors(&mol);
        let fp = fingerprint(&mol, self.profile.target_fp.width())?;
        Ok(PropertyRecord { qed: surrogate_qed(&d), sa: surrogate_sa(&d), ds: surrogate_ds(&fp, &d, &self.profile)? })
    }
}

impl Oracle for SurrogateOracle {
    fn score(&mut self, smiles: &str) -> Result<PropertyRecord, OracleError> {
        self.score_smiles(smiles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::DEFAULT_WIDTH;
    use crate::oracle::builtin_profile;
    use std::collections::BTreeSet;

    fn at_means() -> DescriptorSet {
        DescriptorSet {
            heavy_atoms: 20,
            approx_mw: 300.0,
            ring_count: 2,
            max_ring_size: 6,
            rotatable_proxy: 0,
            hbd_proxy: 1,
            hba_proxy: 0,
            tpsa_proxy: 0.0,
            logp_proxy: 2.0,
            charge_total: 0,
            radical_flag: false,
            bridgehead_count: 0,
            element_set: BTreeSet::new(),
        }
    }

    #[test]
    fn qed_examples() {
        assert_eq!(surrogate_qed(&at_means()), 1.0);
        let heavy = DescriptorSet { approx_mw: 600.0, ..at_means() };
        assert!((surrogate_qed(&heavy) - (-1.0f64).exp()).abs() < 1e-12);
        let mut prev = 1.0;
        for mw in [320.0, 360.0, 420.0, 500.0] {
            let q = surrogate_qed(&DescriptorSet { approx_mw: mw, ..at_means() });
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn sa_examples() {
        let one = DescriptorSet { heavy_atoms: 1, ring_count: 0, max_ring_size: 0, ..at_means() };
        assert!((surrogate_sa(&one) - 1.15).abs() < 1e-12);
        let chain = DescriptorSet { heavy_atoms: 10, ring_count: 0, max_ring_size: 0, ..at_means() };
        assert!((surrogate_sa(&chain) - 2.5).abs() < 1e-12);
        let cage = DescriptorSet { heavy_atoms: 40, ring_count: 8, bridgehead_count: 6, ..at_means() };
        assert_eq!(surrogate_sa(&cage), 10.0);
        // measured from a real parse
        let d = descriptors(&parse_smiles("CCCCCCCCCC").unwrap());
        assert!((surrogate_sa(&d) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ds_minimum_at_seed() {
        let profile = builtin_profile("parp1").unwrap();
        let mol = parse_smiles(&profile.seed_smiles).unwrap();
        let d = descriptors(&mol);
        let fp = fingerprint(&mol, DEFAULT_WIDTH).unwrap();
        assert_eq!(surrogate_ds(&fp, &d, &profile).unwrap(), -18.0);
        let far = DescriptorSet { heavy_atoms: 200, ..d.clone() };
        let ds = surrogate_ds(&Fingerprint::empty(DEFAULT_WIDTH), &far, &profile).unwrap();
        assert!(ds > -1e-6 && ds <= 0.0);
        assert!(surrogate_ds(&Fingerprint::empty(256), &d, &profile).is_err());
    }

    #[test]
    fn ds_non_increasing_in_overlap() {
        let profile = builtin_profile("jak2").unwrap();
        let d = at_means();
        let bits: Vec<usize> = profile.target_fp.ones().collect();
        let mut prev = f64::INFINITY;
        for k in 0..=bits.len() {
            let fp = Fingerprint::from_bits(DEFAULT_WIDTH, bits[..k].iter().copied());
            let ds = surrogate_ds(&fp, &d, &profile).unwrap();
            assert!(ds <= prev);
            prev = ds;
        }
    }

    #[test]
    fn invalid_smiles_is_an_error() {
        let mut o = SurrogateOracle::new(builtin_profile("fa7").unwrap());
        assert!(matches!(o.score("C1CC"), Err(OracleError::InvalidMolecule(_))));
        let r = o.score("CCO").unwrap();
        assert!((0.0..=1.0).contains(&r.qed) && (1.0..=10.0).contains(&r.sa) && r.ds <= 0.0);
    }
}
