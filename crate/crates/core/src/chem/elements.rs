//! Element data used by the parser and descriptor code.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementInfo {
    pub symbol: &'static str,
    pub number: u8,
    pub weight: f64,
    /// Allowed neutral valences, ascending.
    pub valences: &'static [u8],
}

const TABLE: &[ElementInfo] = &[
    ElementInfo { symbol: "H", number: 1, weight: 1.008, valences: &[1] },
    ElementInfo { symbol: "Li", number: 3, weight: 6.94, valences: &[1] },
    ElementInfo { symbol: "B", number: 5, weight: 10.81, valences: &[3] },
    ElementInfo { symbol: "C", number: 6, weight: 12.011, valences: &[4] },
    ElementInfo { symbol: "N", number: 7, weight: 14.007, valences: &[3] },
    ElementInfo { symbol: "O", number: 8, weight: 15.999, valences: &[2] },
    ElementInfo { symbol: "F", number: 9, weight: 18.998, valences: &[1] },
    ElementInfo { symbol: "Na", number: 11, weight: 22.990, valences: &[1] },
    ElementInfo { symbol: "Mg", number: 12, weight: 24.305, valences: &[2] },
    ElementInfo { symbol: "Si", number: 14, weight: 28.085, valences: &[4] },
    ElementInfo { symbol: "P", number: 15, weight: 30.974, valences: &[3, 5] },
    ElementInfo { symbol: "S", number: 16, weight: 32.06, valences: &[2, 4, 6] },
    ElementInfo { symbol: "Cl", number: 17, weight: 35.45, valences: &[1] },
    ElementInfo { symbol: "K", number: 19, weight: 39.098, valences: &[1] },
    ElementInfo { symbol: "Ca", number: 20, weight: 40.078, valences: &[2] },
    ElementInfo { symbol: "Zn", number: 30, weight: 65.38, valences: &[2] },
    ElementInfo { symbol: "As", number: 33, weight: 74.922, valences: &[3, 5] },
    ElementInfo { symbol: "Se", number: 34, weight: 78.971, valences: &[2, 4, 6] },
    ElementInfo { symbol: "Br", number: 35, weight: 79.904, valences: &[1] },
    ElementInfo { symbol: "Sn", number: 50, weight: 118.71, valences: &[2, 4] },
    ElementInfo { symbol: "I", number: 53, weight: 126.904, valences: &[1] },
];

pub fn lookup(symbol: &str) -> Option<&'static ElementInfo> {
    TABLE.iter().find(|e| e.symbol == symbol)
}

/// Element symbol for an aromatic (lowercase) atom spelling.
pub fn aromatic_symbol(lower: &str) -> Option<&'static str> {
    Some(match lower {
        "b" => "B",
        "c" => "C",
        "n" => "N",
        "o" => "O",
        "p" => "P",
        "s" => "S",
        "se" => "Se",
        "as" => "As",
        _ => return None,
    })
}

pub fn is_halogen(symbol: &str) -> bool {
    matches!(symbol, "F" | "Cl" | "Br" | "I")
}

impl ElementInfo {
    /// Largest valence the atom may reach at the given formal charge.
    ///
    /// Nitrogen gains two extra bonds at +1; boron gains one per negative
    /// charge; any other element gains one per positive charge.
    pub fn max_valence(&self, charge: i8) -> u8 {
        let base = *self.valences.last().expect("valence list is non-empty");
        match self.symbol {
            "N" if charge == 1 => 5,
            "N" => base,
            "B" if charge < 0 => base + charge.unsigned_abs(),
            _ if charge > 0 => base + charge as u8,
            _ => base,
        }
    }

    /// Smallest allowed valence that is at least `used`.
    pub fn fill_valence(&self, used: u8) -> Option<u8> {
        self.valences.iter().copied().find(|&v| v >= used)
    }
}
