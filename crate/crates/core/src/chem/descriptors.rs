//! Graph-derived descriptors and the proxy formulas standing in for the
//! usual physicochemical properties.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::elements::is_halogen;
use super::parse::{BondOrder, ParsedMol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub heavy_atoms: usize,
    pub approx_mw: f64,
    pub ring_count: usize,
    pub max_ring_size: usize,
    pub rotatable_proxy: usize,
    pub hbd_proxy: usize,
    pub hba_proxy: usize,
    pub tpsa_proxy: f64,
    pub logp_proxy: f64,
    pub charge_total: i32,
    /// The parser has no radical notation, so this is always false.
    pub radical_flag: bool,
    pub bridgehead_count: usize,
    pub element_set: BTreeSet<String>,
}

/// Ring structure of a molecule graph: which bonds sit on a cycle and the
/// shortest cycle through each ring bond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingInfo {
    pub ring_bond: Vec<bool>,
    /// Unique shortest cycles, each a sorted atom list.
    pub rings: Vec<Vec<usize>>,
    /// Cyclomatic number E - V + C.
    pub cyclomatic: usize,
}

pub fn adjacency(mol: &ParsedMol) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); mol.atoms.len()];
    for (i, b) in mol.bonds.iter().enumerate() {
        adj[b.a].push((b.b, i));
        adj[b.b].push((b.a, i));
    }
    adj
}

/// BFS path from `from` to `to` that avoids bond `skip`, as an atom list.
fn shortest_path_avoiding(
    adj: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    skip: usize,
) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; adj.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            return Some(path);
        }
        for &(v, bi) in &adj[u] {
            if bi != skip && parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

pub fn ring_info(mol: &ParsedMol) -> RingInfo {
    let adj = adjacency(mol);
    let mut ring_bond = vec![false; mol.bonds.len()];
    let mut rings: Vec<Vec<usize>> = Vec::new();
    for (i, b) in mol.bonds.iter().enumerate() {
        if let Some(mut cycle) = shortest_path_avoiding(&adj, b.a, b.b, i) {
            ring_bond[i] = true;
            cycle.sort_unstable();
            if !rings.contains(&cycle) {
                rings.push(cycle);
            }
        }
    }
    rings.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut seen = vec![false; mol.atoms.len()];
    let mut components = 0;
    for start in 0..mol.atoms.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    let cyclomatic = (mol.bonds.len() + components).saturating_sub(mol.atoms.len());
    RingInfo { ring_bond, rings, cyclomatic }
}

/// Atoms shared by two rings that overlap in three or more atoms and that
/// carry at least three ring bonds.
fn bridgeheads(mol: &ParsedMol, info: &RingInfo) -> usize {
    let mut ring_degree = vec![0usize; mol.atoms.len()];
    for (b, &is_ring) in mol.bonds.iter().zip(&info.ring_bond) {
        if is_ring {
            ring_degree[b.a] += 1;
            ring_degree[b.b] += 1;
        }
    }
    let mut heads = BTreeSet::new();
    for (i, r1) in info.rings.iter().enumerate() {
        for r2 in &info.rings[i + 1..] {
            let shared: Vec<usize> = r1.iter().copied().filter(|a| r2.contains(a)).collect();
            if shared.len() >= 3 {
                heads.extend(shared.into_iter().filter(|&a| ring_degree[a] >= 3));
            }
        }
    }
    heads.len()
}

pub fn descriptors(mol: &ParsedMol) -> DescriptorSet {
    let info = ring_info(mol);
    let heavy_degree: Vec<usize> = {
        let mut deg = vec![0; mol.atoms.len()];
        for b in &mol.bonds {
            if mol.atoms[b.a].is_heavy() && mol.atoms[b.b].is_heavy() {
                deg[b.a] += 1;
                deg[b.b] += 1;
            }
        }
        deg
    };

    let mut heavy_atoms = 0;
    let mut approx_mw = 0.0;
    let (mut carbons, mut nitrogens, mut oxygens, mut halogens) = (0usize, 0usize, 0usize, 0usize);
    let mut hbd = 0;
    let mut charge_total = 0i32;
    let mut element_set = BTreeSet::new();
    for atom in &mol.atoms {
        let sym = atom.symbol();
        if atom.is_heavy() {
            heavy_atoms += 1;
        }
        approx_mw += atom.element.weight + f64::from(atom.total_h()) * 1.008;
        charge_total += i32::from(atom.charge);
        element_set.insert(sym.to_string());
        match sym {
            "C" => carbons += 1,
            "N" => nitrogens += 1,
            "O" => oxygens += 1,
            s if is_halogen(s) => halogens += 1,
            _ => {}
        }
        if matches!(sym, "N" | "O") && atom.total_h() > 0 {
            hbd += 1;
        }
    }

    let rotatable_proxy = mol
        .bonds
        .iter()
        .zip(&info.ring_bond)
        .filter(|(b, &ring)| {
            !ring
                && b.order == BondOrder::Single
                && mol.atoms[b.a].is_heavy()
                && mol.atoms[b.b].is_heavy()
                && heavy_degree[b.a] >= 2
                && heavy_degree[b.b] >= 2
        })
        .count();

    let n_o = (nitrogens + oxygens) as f64;
    DescriptorSet {
        heavy_atoms,
        approx_mw,
        ring_count: info.cyclomatic,
        max_ring_size: info.rings.iter().map(Vec::len).max().unwrap_or(0),
        rotatable_proxy,
        hbd_proxy: hbd,
        hba_proxy: nitrogens + oxygens,
        tpsa_proxy: 20.2 * nitrogens as f64 + 17.1 * oxygens as f64,
        logp_proxy: 0.5 * carbons as f64 - n_o + 0.8 * halogens as f64,
        charge_total,
        radical_flag: false,
        bridgehead_count: bridgeheads(mol, &info),
        element_set,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn d(s: &str) -> DescriptorSet {
        descriptors(&parse_smiles(s).unwrap())
    }

    #[test]
    fn benzene() {
        let b = d("c1ccccc1");
        assert_eq!((b.heavy_atoms, b.ring_count, b.max_ring_size), (6, 1, 6));
        assert!((b.approx_mw - (6.0 * 12.011 + 6.0 * 1.008)).abs() < 1e-9);
    }

    #[test]
    fn ethanol() {
        let e = d("CCO");
        assert_eq!((e.heavy_atoms, e.ring_count, e.hbd_proxy, e.hba_proxy), (3, 0, 1, 1));
        assert_eq!(e.rotatable_proxy, 0);
        assert!((e.tpsa_proxy - 17.1).abs() < 1e-12);
        assert!((e.logp_proxy - 0.0).abs() < 1e-12);
    }

    #[test]
    fn cyclopropane() {
        assert_eq!(d("C1CC1").max_ring_size, 3);
    }

    #[test]
    fn fused_rings_keep_small_ring_size() {
        let n = d("c1ccc2ccccc2c1");
        assert_eq!((n.ring_count, n.max_ring_size, n.bridgehead_count), (2, 6, 0));
    }

    #[test]
    fn bridged_bicycle_has_two_bridgeheads() {
        let n = d("C1CC2CCC1C2");
        assert_eq!((n.ring_count, n.max_ring_size, n.bridgehead_count), (2, 5, 2));
    }

    #[test]
    fn rotatable_counts_internal_chain_bonds() {
        // butane: only the central bond joins two atoms of degree 2
        assert_eq!(d("CCCC").rotatable_proxy, 1);
        assert_eq!(d("CCCCCC").rotatable_proxy, 3);
        assert_eq!(d("C1CCCCC1CC").rotatable_proxy, 1);
    }

    #[test]
    fn charges_and_elements() {
        let z = d("C[N+](C)(C)C.[Cl-]");
        assert_eq!(z.charge_total, 0);
        assert!(z.element_set.contains("Cl"));
        assert_eq!(d("CC(=O)[O-]").charge_total, -1);
    }

    #[test]
    fn explicit_hydrogen_atoms_are_not_heavy() {
        let m = d("[H]OC");
        assert_eq!(m.heavy_atoms, 2);
    }
}
