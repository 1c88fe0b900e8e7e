//! Grammar and valence validation over tokenized SMILES.

use std::collections::BTreeMap;

use thiserror::Error;

use super::elements::{self, ElementInfo};
use super::token::{TokenKind, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    Aromatic,
    Double,
    Triple,
    Quadruple,
}

impl BondOrder {
    pub fn value(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Aromatic => 1.5,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Quadruple => 4.0,
        }
    }

    /// Integer contribution of a non-aromatic bond.
    fn integral(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 4,
        }
    }

    /// Small integer code used by fingerprint hashing.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 5,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: &'static ElementInfo,
    pub charge: i8,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens implied by the organic-subset valence rules.
    pub implicit_h: u8,
    pub aromatic: bool,
    pub bracket: bool,
    /// Chirality marker (`@`, `@@`), kept verbatim and otherwise ignored.
    pub chirality: Option<String>,
    pub token_index: usize,
}

impl Atom {
    pub fn symbol(&self) -> &'static str {
        self.element.symbol
    }

    pub fn total_h(&self) -> u8 {
        self.explicit_h + self.implicit_h
    }

    pub fn is_heavy(&self) -> bool {
        self.element.number != 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    /// `/` or `\` marker, retained but unused.
    pub direction: Option<char>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingClosure {
    pub label: String,
    pub open_atom: usize,
    pub close_atom: usize,
    pub open_token: usize,
    pub close_token: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMol {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub ring_closures: Vec<RingClosure>,
    /// Branch depth after each token.
    pub branch_depth: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationFailure {
    #[error("empty molecule")]
    EmptyMolecule,
    #[error("ring bond {digit} is never closed")]
    UnclosedRing { digit: String },
    #[error("unbalanced branch at token {position}")]
    UnbalancedBranch { position: usize },
    #[error("dangling bond symbol at token {position}")]
    DanglingBond { position: usize },
    #[error("valence exceeded on atom {atom}")]
    ValenceExceeded { atom: usize },
    #[error("unknown element in token {position}")]
    UnknownElement { position: usize },
    #[error("malformed bracket atom at token {position}")]
    MalformedBracket { position: usize },
    #[error("conflicting ring closure at token {position}")]
    RingBondConflict { position: usize },
    #[error("aromatic atom {atom} is not in a closed 5- or 6-membered aromatic ring")]
    InvalidAromatic { atom: usize },
    #[error("control token at position {position} inside molecule body")]
    ControlToken { position: usize },
}

impl ValidationFailure {
    /// Short stable name of the violated rule.
    pub fn rule(&self) -> &'static str {
        match self {
            ValidationFailure::EmptyMolecule => "EmptyMolecule",
            ValidationFailure::UnclosedRing { .. } => "UnclosedRing",
            ValidationFailure::UnbalancedBranch { .. } => "UnbalancedBranch",
            ValidationFailure::DanglingBond { .. } => "DanglingBond",
            ValidationFailure::ValenceExceeded { .. } => "ValenceExceeded",
            ValidationFailure::UnknownElement { .. } => "UnknownElement",
            ValidationFailure::MalformedBracket { .. } => "MalformedBracket",
            ValidationFailure::RingBondConflict { .. } => "RingBondConflict",
            ValidationFailure::InvalidAromatic { .. } => "InvalidAromatic",
            ValidationFailure::ControlToken { .. } => "ControlToken",
        }
    }
}

struct BracketSpec {
    element: &'static ElementInfo,
    aromatic: bool,
    chirality: Option<String>,
    hcount: u8,
    charge: i8,
}

fn parse_bracket(text: &str, position: usize) -> Result<BracketSpec, ValidationFailure> {
    let malformed = ValidationFailure::MalformedBracket { position };
    let body = text
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or(malformed.clone())?;
    let b = body.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i >= b.len() {
        return Err(malformed);
    }
    let (element, aromatic) = if b[i].is_ascii_uppercase() {
        let two = body.get(i..i + 2).filter(|s| s.as_bytes()[1].is_ascii_lowercase());
        match two.and_then(elements::lookup) {
            Some(e) => {
                i += 2;
                (e, false)
            }
            None => {
                let e = elements::lookup(&body[i..i + 1])
                    .ok_or(ValidationFailure::UnknownElement { position })?;
                i += 1;
                (e, false)
            }
        }
    } else if b[i].is_ascii_lowercase() {
        let two = body.get(i..i + 2).and_then(elements::aromatic_symbol);
        let (sym, len) = match two {
            Some(s) => (s, 2),
            None => (
                body.get(i..i + 1)
                    .and_then(elements::aromatic_symbol)
                    .ok_or(ValidationFailure::UnknownElement { position })?,
                1,
            ),
        };
        i += len;
        (elements::lookup(sym).expect("aromatic symbols are in the table"), true)
    } else {
        return Err(malformed);
    };

    let mut chirality = None;
    if i < b.len() && b[i] == b'@' {
        let start = i;
        while i < b.len() && b[i] == b'@' {
            i += 1;
        }
        chirality = Some(body[start..i].to_string());
    }

    let mut hcount = 0u8;
    if i < b.len() && b[i] == b'H' {
        i += 1;
        hcount = 1;
        if i < b.len() && b[i].is_ascii_digit() {
            hcount = b[i] - b'0';
            i += 1;
        }
    }

    let mut charge = 0i8;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        let sign: i8 = if b[i] == b'+' { 1 } else { -1 };
        let sym = b[i];
        i += 1;
        if i < b.len() && b[i].is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mag: i8 = body[start..i].parse().map_err(|_| malformed.clone())?;
            charge = sign * mag;
        } else {
            let mut mag = 1i8;
            while i < b.len() && b[i] == sym {
                mag += 1;
                i += 1;
            }
            charge = sign * mag;
        }
    }

    if i < b.len() && b[i] == b':' {
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return Err(malformed);
        }
    }
    if i != b.len() {
        return Err(malformed);
    }
    Ok(BracketSpec { element, aromatic, chirality, hcount, charge })
}

fn bond_symbol(text: &str) -> (Option<BondOrder>, Option<char>) {
    match text {
        "-" => (Some(BondOrder::Single), None),
        "=" => (Some(BondOrder::Double), None),
        "#" => (Some(BondOrder::Triple), None),
        "$" => (Some(BondOrder::Quadruple), None),
        ":" => (Some(BondOrder::Aromatic), None),
        "/" => (Some(BondOrder::Single), Some('/')),
        "\\" => (Some(BondOrder::Single), Some('\\')),
        _ => (None, None),
    }
}

#[derive(Clone, Copy)]
struct PendingBond {
    order: Option<BondOrder>,
    direction: Option<char>,
    token: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<PendingBond>,
    token: usize,
}

/// Validates grammar, valence and aromatic ring membership. Control tokens
/// must already be stripped.
pub fn parse_validate(tokens: &TokenSeq) -> Result<ParsedMol, ValidationFailure> {
    if tokens.is_empty() {
        return Err(ValidationFailure::EmptyMolecule);
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut ring_closures = Vec::new();
    let mut branch_depth = Vec::with_capacity(tokens.len());

    let mut prev: Option<usize> = None;
    let mut pending: Option<PendingBond> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    // BTreeMap keeps the unclosed-ring report deterministic.
    let mut open_rings: BTreeMap<String, OpenRing> = BTreeMap::new();
    let mut ring_order: Vec<String> = Vec::new();

    let add_bond = |bonds: &mut Vec<Bond>,
                    atoms: &[Atom],
                    a: usize,
                    b: usize,
                    p: Option<PendingBond>,
                    position: usize|
     -> Result<(), ValidationFailure> {
        if a == b || bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            return Err(ValidationFailure::RingBondConflict { position });
        }
        let order = match p.and_then(|p| p.order) {
            Some(o) => o,
            None if atoms[a].aromatic && atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        bonds.push(Bond { a, b, order, direction: p.and_then(|p| p.direction) });
        Ok(())
    };

    for (pos, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    let lower = tok.text.chars().next().is_some_and(|c| c.is_ascii_lowercase());
                    let sym = if lower {
                        elements::aromatic_symbol(&tok.text)
                    } else {
                        Some(tok.text.as_str())
                    };
                    let element = sym
                        .and_then(elements::lookup)
                        .ok_or(ValidationFailure::UnknownElement { position: pos })?;
                    Atom {
                        element,
                        charge: 0,
                        explicit_h: 0,
                        implicit_h: 0,
                        aromatic: lower,
                        bracket: false,
                        chirality: None,
                        token_index: pos,
                    }
                } else {
                    let spec = parse_bracket(&tok.text, pos)?;
                    Atom {
                        element: spec.element,
                        charge: spec.charge,
                        explicit_h: spec.hcount,
                        implicit_h: 0,
                        aromatic: spec.aromatic,
                        bracket: true,
                        chirality: spec.chirality,
                        token_index: pos,
                    }
                };
                atoms.push(atom);
                let idx = atoms.len() - 1;
                match prev {
                    Some(p) => add_bond(&mut bonds, &atoms, p, idx, pending.take(), pos)?,
                    None => {
                        if let Some(p) = pending {
                            return Err(ValidationFailure::DanglingBond { position: p.token });
                        }
                    }
                }
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if pending.is_some() || prev.is_none() {
                    return Err(ValidationFailure::DanglingBond { position: pos });
                }
                let (order, direction) = bond_symbol(&tok.text);
                pending = Some(PendingBond { order, direction, token: pos });
            }
            TokenKind::RingBond => {
                let atom = prev.ok_or(ValidationFailure::RingBondConflict { position: pos })?;
                let label = tok.text.trim_start_matches('%').to_string();
                match open_rings.remove(&label) {
                    Some(open) => {
                        let bond = match (open.bond, pending.take()) {
                            (Some(a), Some(b)) if a.order != b.order => {
                                return Err(ValidationFailure::RingBondConflict { position: pos })
                            }
                            (Some(a), _) => Some(a),
                            (None, b) => b,
                        };
                        add_bond(&mut bonds, &atoms, open.atom, atom, bond, pos)?;
                        ring_order.retain(|l| l != &label);
                        ring_closures.push(RingClosure {
                            label,
                            open_atom: open.atom,
                            close_atom: atom,
                            open_token: open.token,
                            close_token: pos,
                        });
                    }
                    None => {
                        ring_order.push(label.clone());
                        open_rings.insert(label, OpenRing { atom, bond: pending.take(), token: pos });
                    }
                }
            }
            TokenKind::BranchOpen => {
                let atom = prev.ok_or(ValidationFailure::UnbalancedBranch { position: pos })?;
                if pending.is_some() {
                    return Err(ValidationFailure::DanglingBond { position: pos });
                }
                branches.push((atom, pos));
            }
            TokenKind::BranchClose => {
                if let Some(p) = pending {
                    return Err(ValidationFailure::DanglingBond { position: p.token });
                }
                let (atom, _) =
                    branches.pop().ok_or(ValidationFailure::UnbalancedBranch { position: pos })?;
                prev = Some(atom);
            }
            TokenKind::Dot => {
                if let Some(p) = pending {
                    return Err(ValidationFailure::DanglingBond { position: p.token });
                }
                if let Some(&(_, open)) = branches.last() {
                    return Err(ValidationFailure::UnbalancedBranch { position: open });
                }
                prev = None;
            }
            TokenKind::Bos | TokenKind::Eos | TokenKind::Pad | TokenKind::Mask => {
                return Err(ValidationFailure::ControlToken { position: pos });
            }
        }
        branch_depth.push(branches.len());
    }

    if let Some(p) = pending {
        return Err(ValidationFailure::DanglingBond { position: p.token });
    }
    if let Some(&(_, open)) = branches.last() {
        return Err(ValidationFailure::UnbalancedBranch { position: open });
    }
    if let Some(label) = ring_order.first() {
        return Err(ValidationFailure::UnclosedRing { digit: label.clone() });
    }
    if atoms.is_empty() {
        return Err(ValidationFailure::EmptyMolecule);
    }

    assign_hydrogens(&mut atoms, &bonds)?;
    check_aromatic_rings(&atoms, &bonds)?;

    Ok(ParsedMol { atoms, bonds, ring_closures, branch_depth })
}

/// Valence check plus implicit hydrogen assignment.
///
/// An aromatic atom counts one unit per aromatic bond. Carbon, nitrogen,
/// phosphorus and boron additionally take one ring pi bond when they carry
/// no exocyclic multiple bond and have room for it.
fn assign_hydrogens(atoms: &mut [Atom], bonds: &[Bond]) -> Result<(), ValidationFailure> {
    let n = atoms.len();
    let mut aromatic_bonds = vec![0u8; n];
    let mut other = vec![0u8; n];
    let mut exocyclic_multiple = vec![false; n];
    for b in bonds {
        for &end in &[b.a, b.b] {
            if b.order == BondOrder::Aromatic {
                aromatic_bonds[end] += 1;
            } else {
                other[end] += b.order.integral();
                if b.order.integral() >= 2 {
                    exocyclic_multiple[end] = true;
                }
            }
        }
    }
    for (idx, atom) in atoms.iter_mut().enumerate() {
        let max = atom.element.max_valence(atom.charge);
        let base = aromatic_bonds[idx] + other[idx] + atom.explicit_h;
        if base > max {
            return Err(ValidationFailure::ValenceExceeded { atom: idx });
        }
        if atom.bracket {
            continue;
        }
        let takes_pi = atom.aromatic
            && matches!(atom.symbol(), "C" | "N" | "P" | "B")
            && !exocyclic_multiple[idx]
            && base < max;
        let used = base + u8::from(takes_pi);
        let target = atom
            .element
            .fill_valence(used)
            .ok_or(ValidationFailure::ValenceExceeded { atom: idx })?;
        atom.implicit_h = target - used;
    }
    Ok(())
}

fn check_aromatic_rings(atoms: &[Atom], bonds: &[Bond]) -> Result<(), ValidationFailure> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); atoms.len()];
    for b in bonds {
        if atoms[b.a].aromatic && atoms[b.b].aromatic {
            adj[b.a].push(b.b);
            adj[b.b].push(b.a);
        }
    }
    for (idx, atom) in atoms.iter().enumerate() {
        if atom.aromatic && !on_small_cycle(&adj, idx) {
            return Err(ValidationFailure::InvalidAromatic { atom: idx });
        }
    }
    Ok(())
}

/// True when `start` lies on a simple cycle of length 5 or 6.
fn on_small_cycle(adj: &[Vec<usize>], start: usize) -> bool {
    fn walk(adj: &[Vec<usize>], start: usize, node: usize, path: &mut Vec<usize>) -> bool {
        for &next in &adj[node] {
            if next == start && (5..=6).contains(&path.len()) {
                return true;
            }
            if path.len() < 6 && !path.contains(&next) && walk_inner(adj, start, next, path) {
                return true;
            }
        }
        false
    }
    fn walk_inner(adj: &[Vec<usize>], start: usize, node: usize, path: &mut Vec<usize>) -> bool {
        path.push(node);
        let found = walk(adj, start, node, path);
        path.pop();
        found
    }
    let mut path = vec![start];
    walk(adj, start, start, &mut path)
}

/// Tokenize and validate in one step.
pub fn parse_smiles(text: &str) -> Result<ParsedMol, SmilesError> {
    let toks = super::tokenize(text)?;
    Ok(parse_validate(&toks)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error(transparent)]
    Tokenize(#[from] super::token::TokenizeError),
    #[error(transparent)]
    Invalid(#[from] ValidationFailure),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ParsedMol, SmilesError> {
        parse_smiles(s)
    }

    fn failure(s: &str) -> ValidationFailure {
        match parse(s) {
            Err(SmilesError::Invalid(f)) => f,
            other => panic!("expected validation failure for {s}, got {other:?}"),
        }
    }

    #[test]
    fn carbon_dioxide() {
        let m = parse("O=C=O").unwrap();
        let c = 1;
        let sum: f64 = m.bonds.iter().filter(|b| b.a == c || b.b == c).map(|b| b.order.value()).sum();
        assert_eq!(sum, 4.0);
        assert_eq!(m.atoms[c].implicit_h, 0);
    }

    #[test]
    fn grammar_failures() {
        assert_eq!(failure("C1CCCCC"), ValidationFailure::UnclosedRing { digit: "1".into() });
        assert!(matches!(failure("O=C("), ValidationFailure::UnbalancedBranch { .. }));
        assert!(matches!(failure("CC#"), ValidationFailure::DanglingBond { .. }));
        assert!(matches!(failure("CC)"), ValidationFailure::UnbalancedBranch { .. }));
        assert!(matches!(failure("C(=)C"), ValidationFailure::DanglingBond { .. }));
        assert_eq!(parse_validate(&TokenSeq::default()).unwrap_err(), ValidationFailure::EmptyMolecule);
    }

    #[test]
    fn valence_limits() {
        assert!(matches!(failure("C(C)(C)(C)(C)C"), ValidationFailure::ValenceExceeded { atom: 0 }));
        assert!(matches!(failure("FF=C"), ValidationFailure::ValenceExceeded { .. }));
        assert!(parse("CS(=O)(=O)C").is_ok());
        assert!(parse("OP(=O)(O)O").is_ok());
        assert!(parse("C[N+](C)(C)C").is_ok());
        assert!(matches!(failure("CN(C)(C)C"), ValidationFailure::ValenceExceeded { .. }));
    }

    #[test]
    fn implicit_hydrogens() {
        let m = parse("CCO").unwrap();
        let h: Vec<u8> = m.atoms.iter().map(|a| a.total_h()).collect();
        assert_eq!(h, vec![3, 2, 1]);
        let benzene = parse("c1ccccc1").unwrap();
        assert!(benzene.atoms.iter().all(|a| a.total_h() == 1));
        let pyridine = parse("c1ccncc1").unwrap();
        assert_eq!(pyridine.atoms[3].total_h(), 0);
        let pyrrole = parse("c1cc[nH]c1").unwrap();
        assert_eq!(pyrrole.atoms[3].total_h(), 1);
    }

    #[test]
    fn aromatic_needs_small_ring() {
        assert!(matches!(failure("cc"), ValidationFailure::InvalidAromatic { .. }));
        assert!(matches!(failure("c1ccc1"), ValidationFailure::InvalidAromatic { .. }));
        assert!(parse("c1ccc2ccccc2c1").is_ok());
        assert!(parse("c1ccoc1").is_ok());
    }

    #[test]
    fn stereo_and_charges_are_retained() {
        let m = parse("N[C@@H](CO)C/C=C/C").unwrap();
        assert_eq!(m.atoms[1].chirality.as_deref(), Some("@@"));
        assert_eq!(m.atoms[1].explicit_h, 1);
        assert!(m.bonds.iter().any(|b| b.direction == Some('/')));
        let nitro = parse("c1ccc([N+](=O)[O-])cc1").unwrap();
        let charges: i32 = nitro.atoms.iter().map(|a| a.charge as i32).sum();
        assert_eq!(charges, 0);
    }

    #[test]
    fn ring_closure_bookkeeping() {
        let m = parse("C1CC2CCC1C2").unwrap();
        assert_eq!(m.ring_closures.len(), 2);
        assert_eq!(m.bonds.len(), 8);
        assert!(matches!(failure("C11"), ValidationFailure::RingBondConflict { .. }));
        assert!(matches!(failure("C=1CC-1"), ValidationFailure::RingBondConflict { .. }));
    }

    #[test]
    fn branch_depth_returns_to_zero() {
        let m = parse("CC(C(C)C)O").unwrap();
        assert_eq!(*m.branch_depth.last().unwrap(), 0);
        assert_eq!(m.branch_depth.iter().max(), Some(&2));
    }

    #[test]
    fn dot_separated_components() {
        let m = parse("CC#N.COC(=O)c1ccc(F)cc1F").unwrap();
        assert_eq!(m.atoms.len(), 15);
        assert!(matches!(failure("C(.C)"), ValidationFailure::UnbalancedBranch { .. }));
    }
}
