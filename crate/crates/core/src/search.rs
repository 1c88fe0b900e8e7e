//! Gated Monte Carlo tree search over block continuations.
//!
//! Each node is a decoded prefix of whole blocks. An iteration descends by a
//! mean/max blended UCT score, samples a batch of candidate next blocks and
//! keeps one that differs from every sibling, rolls the child out to a full
//! molecule, and backs the gated reward up the path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{decode_block, run_to_end, DecodeConfig, DecodeError, DecodeState, TokenChoice};
use crate::diffusion::PredictorParams;
use crate::oracle::{Oracle, OracleError, PropertyRecord};
use crate::rng::{derive_seed, keyed_uniform};
use crate::vocab::{TokenId, BOS, EOS, MASK};
use crate::vocab::Vocab;
use crate::fragment::strip_controls;

const TAG_EXPAND: u64 = 11;
const TAG_PICK: u64 = 12;
const TAG_ROLLOUT: u64 = 13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("child has not been visited")]
    UnvisitedChild,
    #[error("no traversable node left in the tree")]
    ExhaustedTree,
    #[error("every sampled block duplicates an existing sibling")]
    NoNovelCandidate,
    #[error("invalid search config: {0}")]
    BadConfig(String),
    #[error("oracle unavailable: {reason}")]
    OracleUnavailable { reason: String, partial: Box<SearchResult> },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Feasibility gate on QED and SA with a fixed penalty for failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub qed_min: f64,
    pub sa_max: f64,
    pub penalty: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { qed_min: 0.5, sa_max: 5.0, penalty: -1.0 }
    }
}

impl GateConfig {
    pub fn unconstrained() -> Self {
        Self { qed_min: 0.0, sa_max: f64::INFINITY, penalty: -1.0 }
    }

    pub fn passes(&self, p: &PropertyRecord) -> bool {
        p.qed >= self.qed_min && p.sa <= self.sa_max
    }

    /// Negated docking score inside the gate, the penalty outside.
    pub fn reward(&self, p: &PropertyRecord) -> f64 {
        if self.passes(p) {
            -p.ds
        } else {
            self.penalty
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: usize,
    pub exploration: f64,
    /// Weight of the mean return against the max return.
    pub lambda: f64,
    pub beta: f64,
    pub root_cap: usize,
    pub child_cap: usize,
    pub cap_min: usize,
    pub cap_max: usize,
    pub expansion_batch: usize,
    pub rollouts: usize,
    pub max_depth: usize,
    pub decode: DecodeConfig,
    pub gate: GateConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            exploration: 2.1,
            lambda: 0.5,
            beta: 2.0,
            root_cap: 20,
            child_cap: 8,
            cap_min: 8,
            cap_max: 10,
            expansion_batch: 64,
            rollouts: 1,
            max_depth: 100,
            decode: DecodeConfig { choice: TokenChoice::Sample, ..DecodeConfig::default() },
            gate: GateConfig::default(),
            seed: 42,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::BadConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.cap_min > self.cap_max {
            return bad("cap_min exceeds cap_max");
        }
        if self.expansion_batch == 0 || self.rollouts == 0 {
            return bad("expansion batch and rollout count must be positive");
        }
        // surrogate rewards are -ds >= 0, so the penalty must sit below zero
        if !(self.gate.penalty < 0.0) {
            return bad("penalty must be negative");
        }
        self.decode.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    /// Decoded ids for positions `0..depth * block`.
    pub prefix: Vec<TokenId>,
    pub depth: usize,
    pub visits: usize,
    pub mean: f64,
    pub max: f64,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub cap: usize,
    pub cached_reward: Option<f64>,
    pub terminal: bool,
    /// Set when expansion found nothing new.
    pub saturated: bool,
}

impl SearchNode {
    fn new(prefix: Vec<TokenId>, depth: usize, parent: Option<usize>, cap: usize) -> Self {
        Self {
            prefix,
            depth,
            visits: 0,
            mean: 0.0,
            max: f64::NEG_INFINITY,
            children: Vec::new(),
            parent,
            cap,
            cached_reward: None,
            terminal: false,
            saturated: false,
        }
    }

    pub fn fully_expanded(&self) -> bool {
        self.saturated || self.children.len() >= self.cap
    }

    /// Block `b` of the prefix.
    pub fn block(&self, b: usize, k: usize) -> &[TokenId] {
        &self.prefix[b * k..(b + 1) * k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn new(root_cap: usize) -> Self {
        Self { nodes: vec![SearchNode::new(Vec::new(), 0, None, root_cap)] }
    }

    pub fn add_child(&mut self, parent: usize, prefix: Vec<TokenId>, cap: usize) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(SearchNode::new(prefix, depth, Some(parent), cap));
        self.nodes[parent].children.push(id);
        id
    }
}

/// `lambda * mean + (1 - lambda) * max + c * sqrt(ln(parent_visits) / visits)`
pub fn uct_score(child: &SearchNode, parent_visits: usize, lambda: f64, c: f64) -> Result<f64, SearchError> {
    if child.visits == 0 || parent_visits == 0 {
        return Err(SearchError::UnvisitedChild);
    }
    let explore = ((parent_visits as f64).ln() / child.visits as f64).sqrt();
    Ok(lambda * child.mean + (1.0 - lambda) * child.max + c * explore)
}

/// Width from the spread of visited children's means around the node's
/// own mean; `None` when no child has been visited.
pub fn adaptive_cap(tree: &SearchTree, id: usize, beta: f64, cap_min: usize, cap_max: usize) -> Option<usize> {
    let node = &tree.nodes[id];
    let spread = node
        .children
        .iter()
        .map(|&c| &tree.nodes[c])
        .filter(|c| c.visits > 0)
        .map(|c| (c.mean - node.mean).abs())
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))?;
    let width = (beta * spread).floor();
    let width = if width.is_finite() && width > 0.0 { width as usize } else { 0 };
    Some(width.clamp(cap_min, cap_max))
}

/// Descends from the root to the first node that is terminal or still has
/// room for a child, refreshing non-root widths on the way.
pub fn select(tree: &mut SearchTree, cfg: &SearchConfig) -> Result<Vec<usize>, SearchError> {
    let mut path = vec![0];
    let mut cur = 0;
    loop {
        if cur != 0 {
            if let Some(cap) = adaptive_cap(tree, cur, cfg.beta, cfg.cap_min, cfg.cap_max) {
                tree.nodes[cur].cap = cap;
            }
        }
        let node = &tree.nodes[cur];
        if node.terminal || !node.fully_expanded() {
            return Ok(path);
        }
        if node.children.is_empty() {
            return Err(SearchError::ExhaustedTree);
        }
        let next = match node.children.iter().find(|&&c| tree.nodes[c].visits == 0) {
            Some(&c) => c,
            None => {
                let mut best = (node.children[0], f64::NEG_INFINITY);
                for &c in &node.children {
                    let s = uct_score(&tree.nodes[c], node.visits, cfg.lambda, cfg.exploration)?;
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                best.0
            }
        };
        path.push(next);
        cur = next;
    }
}

fn base_row(prefix: &[TokenId], length: usize) -> Vec<TokenId> {
    let mut row = vec![MASK; length];
    if prefix.is_empty() {
        row[0] = BOS;
    } else {
        row[..prefix.len()].copy_from_slice(prefix);
    }
    row
}

/// Samples a batch of next blocks and attaches one that no sibling already
/// has.
pub fn expand(
    tree: &mut SearchTree,
    id: usize,
    cfg: &SearchConfig,
    params: &PredictorParams,
    iteration: u64,
) -> Result<usize, SearchError> {
    let k = cfg.decode.block;
    let node = &tree.nodes[id];
    let depth = node.depth;
    let row = base_row(&node.prefix, cfg.decode.length);
    let lanes: Vec<u64> = (0..cfg.expansion_batch as u64).collect();
    let mut state = DecodeState::from_rows(vec![row; cfg.expansion_batch], lanes, depth);
    let dcfg = DecodeConfig { seed: derive_seed(cfg.seed, TAG_EXPAND, iteration), ..cfg.decode.clone() };
    decode_block(&mut state, params, &dcfg)?;

    let siblings: Vec<&[TokenId]> = node.children.iter().map(|&c| tree.nodes[c].block(depth, k)).collect();
    let survivors: Vec<&Vec<TokenId>> = state
        .rows
        .iter()
        .filter(|r| !siblings.contains(&&r[depth * k..(depth + 1) * k]))
        .collect();
    if survivors.is_empty() {
        let node = &mut tree.nodes[id];
        node.saturated = true;
        if node.children.is_empty() {
            node.terminal = true;
        }
        return Err(SearchError::NoNovelCandidate);
    }
    let u = keyed_uniform(derive_seed(cfg.seed, TAG_PICK, iteration), 0, 0);
    let pick = ((u * survivors.len() as f64) as usize).min(survivors.len() - 1);
    let chosen = survivors[pick][..(depth + 1) * k].to_vec();
    let blocks = cfg.decode.length / k;
    let terminal = chosen.contains(&EOS) || depth + 1 >= cfg.max_depth || depth + 1 >= blocks;
    let child = tree.add_child(id, chosen, cfg.child_cap);
    tree.nodes[child].terminal = terminal;
    Ok(child)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub smiles: String,
    pub reward: f64,
    pub props: Option<PropertyRecord>,
    pub passes_gate: bool,
    pub depth: usize,
    pub iteration: usize,
}

/// Scores one completed body; a fatal oracle error is returned, every other
/// failure becomes the penalty.
pub fn score_body(
    body: &[TokenId],
    vocab: &Vocab,
    gate: &GateConfig,
    oracle: &mut dyn Oracle,
) -> Result<(String, f64, Option<PropertyRecord>), OracleError> {
    let smiles = vocab.decode(body).unwrap_or_default();
    if crate::chem::parse_smiles(&smiles).is_err() {
        return Ok((smiles, gate.penalty, None));
    }
    match oracle.score(&smiles) {
        Ok(p) => Ok((smiles, gate.reward(&p), Some(p))),
        Err(e) if e.is_fatal() => Err(e),
        Err(_) => Ok((smiles, gate.penalty, None)),
    }
}

/// Completes the child's prefix `rollouts` times and returns the best
/// reward with every rollout record.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    tree: &mut SearchTree,
    id: usize,
    cfg: &SearchConfig,
    params: &PredictorParams,
    vocab: &Vocab,
    oracle: &mut dyn Oracle,
    iteration: usize,
) -> Result<(f64, Vec<Rollout>), SearchError> {
    let node = &tree.nodes[id];
    let row = base_row(&node.prefix, cfg.decode.length);
    let lanes: Vec<u64> = (0..cfg.rollouts as u64).collect();
    let mut state = DecodeState::from_rows(vec![row; cfg.rollouts], lanes, node.depth);
    let dcfg = DecodeConfig { seed: derive_seed(cfg.seed, TAG_ROLLOUT, iteration as u64), ..cfg.decode.clone() };
    let done = run_to_end(&mut state, params, &dcfg)?;
    let mut best = f64::NEG_INFINITY;
    let mut records = Vec::with_capacity(done.len());
    for g in done {
        let body = strip_controls(&g.ids);
        let (smiles, reward, props) = score_body(&body, vocab, &cfg.gate, oracle).map_err(|e| {
            SearchError::OracleUnavailable { reason: e.to_string(), partial: Box::default() }
        })?;
        best = best.max(reward);
        records.push(Rollout {
            smiles,
            reward,
            passes_gate: props.is_some_and(|p| cfg.gate.passes(&p)),
            props,
            depth: node.depth,
            iteration,
        });
    }
    tree.nodes[id].cached_reward = Some(best);
    Ok((best, records))
}

pub fn backpropagate(tree: &mut SearchTree, path: &[usize], reward: f64) {
    for &id in path {
        let n = &mut tree.nodes[id];
        n.visits += 1;
        n.mean += (reward - n.mean) / n.visits as f64;
        n.max = n.max.max(reward);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Every rollout in iteration order.
    pub rollouts: Vec<Rollout>,
    /// Gate-passing rollouts, unique by SMILES, best reward first.
    pub hits: Vec<Rollout>,
    pub best: Option<Rollout>,
    pub iterations: usize,
    pub nodes: usize,
}

impl SearchResult {
    fn finish(rollouts: Vec<Rollout>, iterations: usize, nodes: usize) -> Self {
        let mut hits: Vec<Rollout> = Vec::new();
        for r in rollouts.iter().filter(|r| r.passes_gate) {
            match hits.iter_mut().find(|h| h.smiles == r.smiles) {
                Some(h) if r.reward > h.reward => *h = r.clone(),
                Some(_) => {}
                None => hits.push(r.clone()),
            }
        }
        hits.sort_by(|a, b| b.reward.total_cmp(&a.reward));
        let best = rollouts.iter().fold(None::<&Rollout>, |acc, r| match acc {
            Some(a) if a.reward >= r.reward => Some(a),
            _ => Some(r),
        });
        Self { best: best.cloned(), hits, rollouts, iterations, nodes }
    }

    pub fn best_reward(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.reward)
    }
}

pub fn run_search(
    params: &PredictorParams,
    vocab: &Vocab,
    cfg: &SearchConfig,
    oracle: &mut dyn Oracle,
) -> Result<SearchResult, SearchError> {
    run_search_with_tree(params, vocab, cfg, oracle).map(|(r, _)| r)
}

/// [`run_search`] that also hands back the final tree.
pub fn run_search_with_tree(
    params: &PredictorParams,
    vocab: &Vocab,
    cfg: &SearchConfig,
    oracle: &mut dyn Oracle,
) -> Result<(SearchResult, SearchTree), SearchError> {
    cfg.validate()?;
    let mut tree = SearchTree::new(cfg.root_cap);
    let mut rollouts = Vec::new();
    let mut done = 0;
    for it in 0..cfg.iterations {
        done = it + 1;
        let mut path = match select(&mut tree, cfg) {
            Ok(p) => p,
            Err(SearchError::ExhaustedTree) => break,
            Err(e) => return Err(e),
        };
        let leaf = *path.last().expect("path starts at the root");
        if tree.nodes[leaf].terminal {
            match tree.nodes[leaf].cached_reward {
                Some(r) => backpropagate(&mut tree, &path, r),
                None => break,
            }
            continue;
        }
        let child = match expand(&mut tree, leaf, cfg, params, it as u64) {
            Ok(c) => c,
            Err(SearchError::NoNovelCandidate) => continue,
            Err(e) => return Err(e),
        };
        path.push(child);
        match simulate(&mut tree, child, cfg, params, vocab, oracle, it) {
            Ok((reward, recs)) => {
                rollouts.extend(recs);
                backpropagate(&mut tree, &path, reward);
            }
            Err(SearchError::OracleUnavailable { reason, .. }) => {
                let partial = SearchResult::finish(rollouts, it, tree.nodes.len());
                return Err(SearchError::OracleUnavailable { reason, partial: Box::new(partial) });
            }
            Err(e) => return Err(e),
        }
    }
    let result = SearchResult::finish(rollouts, done, tree.nodes.len());
    Ok((result, tree))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(visits: usize, mean: f64, max: f64) -> SearchNode {
        SearchNode { visits, mean, max, ..SearchNode::new(vec![], 1, Some(0), 8) }
    }

    #[test]
    fn uct_examples() {
        // parent visits e^1 is not an integer; use the formula's pieces
        let c = node(1, 1.0, 2.0);
        let s = uct_score(&c, 3, 0.5, 2.1).unwrap();
        assert!((s - (0.5 + 1.0 + 2.1 * (3f64).ln().sqrt())).abs() < 1e-12);
        assert_eq!(uct_score(&node(2, 1.5, 9.0), 4, 1.0, 0.0).unwrap(), 1.5);
        assert_eq!(uct_score(&node(2, 1.5, 9.0), 4, 0.0, 0.0).unwrap(), 9.0);
        assert_eq!(uct_score(&node(0, 0.0, 0.0), 4, 0.5, 1.0), Err(SearchError::UnvisitedChild));
    }

    fn tree_with_children(parent_mean: f64, child_means: &[f64]) -> SearchTree {
        let mut t = SearchTree::new(20);
        t.nodes[0].mean = parent_mean;
        t.nodes[0].visits = 1;
        for &m in child_means {
            let c = t.add_child(0, vec![], 8);
            t.nodes[c].visits = 1;
            t.nodes[c].mean = m;
        }
        t
    }

    #[test]
    fn cap_examples() {
        assert_eq!(adaptive_cap(&tree_with_children(0.0, &[4.7]), 0, 2.0, 8, 10), Some(9));
        assert_eq!(adaptive_cap(&tree_with_children(1.0, &[1.0, 1.0]), 0, 2.0, 8, 10), Some(8));
        assert_eq!(adaptive_cap(&tree_with_children(0.0, &[-100.0]), 0, 2.0, 8, 10), Some(10));
        assert_eq!(adaptive_cap(&SearchTree::new(20), 0, 2.0, 8, 10), None);
    }

    #[test]
    fn backprop_running_stats() {
        let mut t = SearchTree::new(20);
        backpropagate(&mut t, &[0], 5.0);
        assert_eq!((t.nodes[0].visits, t.nodes[0].mean, t.nodes[0].max), (1, 5.0, 5.0));
        let mut t = SearchTree::new(20);
        backpropagate(&mut t, &[0], 1.0);
        backpropagate(&mut t, &[0], 3.0);
        assert_eq!((t.nodes[0].mean, t.nodes[0].max), (2.0, 3.0));
    }

    #[test]
    fn select_fresh_root_and_ties() {
        let cfg = SearchConfig::default();
        let mut t = SearchTree::new(2);
        assert_eq!(select(&mut t, &cfg).unwrap(), vec![0]);
        let a = t.add_child(0, vec![], 8);
        let b = t.add_child(0, vec![], 8);
        for id in [0, a, b] {
            t.nodes[id].visits = 2;
            t.nodes[id].mean = 1.0;
            t.nodes[id].max = 1.0;
        }
        t.nodes[0].visits = 4;
        assert_eq!(select(&mut t, &cfg).unwrap(), vec![0, a]);
    }

    #[test]
    fn unvisited_child_first() {
        let cfg = SearchConfig::default();
        let mut t = SearchTree::new(2);
        let a = t.add_child(0, vec![], 8);
        let b = t.add_child(0, vec![], 8);
        t.nodes[0].visits = 1;
        t.nodes[a].visits = 1;
        t.nodes[a].mean = 100.0;
        t.nodes[a].max = 100.0;
        assert_eq!(select(&mut t, &cfg).unwrap(), vec![0, b]);
    }

    #[test]
    fn gate_examples() {
        let g = GateConfig::default();
        assert_eq!(g.reward(&PropertyRecord { qed: 0.6, sa: 4.0, ds: -9.2 }), 9.2);
        assert_eq!(g.reward(&PropertyRecord { qed: 0.4, sa: 4.0, ds: -9.2 }), -1.0);
        let u = GateConfig::unconstrained();
        assert_eq!(u.reward(&PropertyRecord { qed: 0.0, sa: 10.0, ds: -3.0 }), 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig { lambda: 1.5, ..SearchConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SearchConfig { gate: GateConfig { penalty: 0.0, ..GateConfig::default() }, ..SearchConfig::default() };
        assert!(bad.validate().is_err());
    }
}
