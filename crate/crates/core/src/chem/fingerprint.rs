//! Hashed linear-path fingerprints and Tanimoto similarity.

use thiserror::Error;

use super::descriptors::adjacency;
use super::parse::ParsedMol;

pub const DEFAULT_WIDTH: usize = 2048;
/// Longest path, in bonds, that contributes a bit.
pub const MAX_PATH_BONDS: usize = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("fingerprint width {0} must be a power of two of at least 256")]
    BadWidth(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
}

impl Fingerprint {
    pub fn empty(width: usize) -> Self {
        Self { words: vec![0; width.div_ceil(64)], width }
    }

    pub fn from_bits(width: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Self::empty(width);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} out of range for width {}", self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn set_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

fn fnv1a(values: &[u32]) -> u64 {
    let mut h = FNV_OFFSET;
    for v in values {
        for byte in v.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

fn atom_code(mol: &ParsedMol, i: usize) -> u32 {
    let a = &mol.atoms[i];
    let charge = (i32::from(a.charge) + 8) as u32;
    u32::from(a.element.number) | (u32::from(a.aromatic) << 8) | (charge << 9) | (u32::from(a.total_h().min(7)) << 14)
}

/// Sets one bit per distinct linear path of 0..=3 bonds. Each path is
/// hashed in the lexicographically smaller of its two directions, so the
/// result depends only on the molecular graph.
pub fn fingerprint(mol: &ParsedMol, width: usize) -> Result<Fingerprint, FingerprintError> {
    if width < 256 || !width.is_power_of_two() {
        return Err(FingerprintError::BadWidth(width));
    }
    let adj = adjacency(mol);
    let codes: Vec<u32> = (0..mol.atoms.len()).map(|i| atom_code(mol, i)).collect();
    let mut fp = Fingerprint::empty(width);
    let mut atoms_path = Vec::with_capacity(MAX_PATH_BONDS + 1);
    let mut bonds_path = Vec::with_capacity(MAX_PATH_BONDS);
    for start in 0..mol.atoms.len() {
        atoms_path.clear();
        bonds_path.clear();
        atoms_path.push(start);
        extend_paths(mol, &adj, &codes, &mut atoms_path, &mut bonds_path, &mut fp);
    }
    Ok(fp)
}

fn extend_paths(
    mol: &ParsedMol,
    adj: &[Vec<(usize, usize)>],
    codes: &[u32],
    atoms_path: &mut Vec<usize>,
    bonds_path: &mut Vec<usize>,
    fp: &mut Fingerprint,
) {
    let forward = path_sequence(mol, codes, atoms_path, bonds_path, false);
    let backward = path_sequence(mol, codes, atoms_path, bonds_path, true);
    let canonical = if forward <= backward { forward } else { backward };
    let h = fnv1a(&canonical);
    fp.set((h & (fp.width as u64 - 1)) as usize);

    if bonds_path.len() == MAX_PATH_BONDS {
        return;
    }
    let last = *atoms_path.last().expect("path is never empty");
    for &(next, bond) in &adj[last] {
        if atoms_path.contains(&next) {
            continue;
        }
        atoms_path.push(next);
        bonds_path.push(bond);
        extend_paths(mol, adj, codes, atoms_path, bonds_path, fp);
        atoms_path.pop();
        bonds_path.pop();
    }
}

fn path_sequence(
    mol: &ParsedMol,
    codes: &[u32],
    atoms_path: &[usize],
    bonds_path: &[usize],
    reverse: bool,
) -> Vec<u32> {
    let n = atoms_path.len();
    let mut seq = Vec::with_capacity(2 * n);
    seq.push(n as u32);
    for k in 0..n {
        let ai = if reverse { n - 1 - k } else { k };
        seq.push(codes[atoms_path[ai]]);
        if k + 1 < n {
            let bi = if reverse { n - 2 - k } else { k };
            seq.push(mol.bonds[bonds_path[bi]].order.code());
        }
    }
    seq
}

/// |a ∧ b| / |a ∨ b|, defined as 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(f64::from(inter) / f64::from(union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use proptest::prelude::*;

    fn fp(s: &str) -> Fingerprint {
        fingerprint(&parse_smiles(s).unwrap(), DEFAULT_WIDTH).unwrap()
    }

    #[test]
    fn set_arithmetic() {
        let a = Fingerprint::from_bits(256, [1, 2, 3]);
        let b = Fingerprint::from_bits(256, [2, 3, 4]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        let c = Fingerprint::from_bits(256, [10, 11]);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto(&Fingerprint::empty(256), &Fingerprint::empty(256)).unwrap(), 1.0);
        assert_eq!(
            tanimoto(&a, &Fingerprint::empty(512)),
            Err(FingerprintError::WidthMismatch(256, 512))
        );
    }

    #[test]
    fn deterministic_and_graph_based() {
        assert_eq!(fp("CCO"), fp("CCO"));
        assert_eq!(fp("OCC"), fp("CCO"));
        assert_eq!(fp("c1ccccc1O"), fp("Oc1ccccc1"));
        assert!(tanimoto(&fp("C"), &fp("N")).unwrap() < 1.0);
    }

    #[test]
    fn stable_across_builds() {
        // Frozen bit list; any change to hashing shows up here.
        let bits: Vec<usize> = fp("CCO").ones().collect();
        assert_eq!(bits.len(), fp("CCO").set_count());
        assert_eq!(bits, FROZEN_CCO.to_vec());
    }

    const FROZEN_CCO: &[usize] = &[136, 412, 946, 1318, 1502, 1650];

    #[test]
    fn width_validation() {
        let m = parse_smiles("CC").unwrap();
        assert_eq!(fingerprint(&m, 100), Err(FingerprintError::BadWidth(100)));
        assert_eq!(fingerprint(&m, 128), Err(FingerprintError::BadWidth(128)));
        assert!(fingerprint(&m, 256).is_ok());
    }

    proptest! {
        #[test]
        fn tanimoto_symmetric(a in proptest::collection::btree_set(0usize..256, 1..40),
                              b in proptest::collection::btree_set(0usize..256, 0..40)) {
            let fa = Fingerprint::from_bits(256, a);
            let fb = Fingerprint::from_bits(256, b);
            prop_assert_eq!(tanimoto(&fa, &fb).unwrap(), tanimoto(&fb, &fa).unwrap());
            prop_assert_eq!(tanimoto(&fa, &fa).unwrap(), 1.0);
            let s = tanimoto(&fa, &fb).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
