//! Topology-only SMILES reader.
//!
//! Supports organic-subset atoms, bracket atoms, explicit bonds, branches,
//! ring closures (`1`-`9`, `%nn`) and dot-separated components. Stereo and
//! charge annotations are accepted and dropped.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unsupported token {token:?} at position {position}")]
    UnsupportedToken { position: usize, token: String },
    #[error("unbalanced branch at position {position}")]
    UnbalancedBranch { position: usize },
    #[error("ring closure {digit} opened but never closed")]
    UnclosedRing { digit: u32 },
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub symbol: String,
    pub aromatic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesMolecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub source: String,
}

impl SmilesMolecule {
    /// Number of independent cycles (`|E| - |V| + components`).
    pub fn ring_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.atoms.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut components = self.atoms.len();
        for bond in &self.bonds {
            let (ra, rb) = (find(&mut parent, bond.a), find(&mut parent, bond.b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        self.bonds.len() + components - self.atoms.len()
    }
}

const ORGANIC_TWO: [&str; 2] = ["Cl", "Br"];
const ORGANIC_ONE: [char; 8] = ['B', 'C', 'N', 'O', 'P', 'S', 'F', 'I'];
const AROMATIC_ONE: [char; 6] = ['b', 'c', 'n', 'o', 'p', 's'];

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    source: &'a str,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending_bond: Option<BondOrder>,
    branch_stack: Vec<(Option<usize>, usize)>,
    open_rings: BTreeMap<u32, (usize, Option<BondOrder>)>,
}

impl<'a> Parser<'a> {
    fn unsupported(&self, position: usize, token: impl Into<String>) -> SmilesError {
        SmilesError::UnsupportedToken {
            position,
            token: token.into(),
        }
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: Option<BondOrder>,
    ) -> Result<(), SmilesError> {
        let (lo, hi) = (a.min(b), a.max(b));
        if a == b || self.bonds.iter().any(|x| x.a == lo && x.b == hi) {
            return Err(SmilesError::DuplicateBond(lo, hi));
        }
        let order = order.unwrap_or(if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        });
        self.bonds.push(Bond {
            a: lo,
            b: hi,
            order,
        });
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = self.pending_bond.take();
            self.add_bond(prev, idx, order)?;
        }
        self.pending_bond = None;
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self, digit: u32, position: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return Err(self.unsupported(position, digit.to_string()));
        };
        let order = self.pending_bond.take();
        match self.open_rings.remove(&digit) {
            Some((other, open_order)) => self.add_bond(other, current, order.or(open_order)),
            None => {
                self.open_rings.insert(digit, (current, order));
                Ok(())
            }
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        self.pos += 1;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let c = *self
            .chars
            .get(self.pos)
            .ok_or_else(|| self.unsupported(start, "["))?;
        let atom = if c.is_ascii_uppercase() {
            let mut symbol = c.to_string();
            if let Some(&next) = self.chars.get(self.pos + 1) {
                if next.is_ascii_lowercase() {
                    symbol.push(next);
                }
            }
            self.pos += symbol.len();
            Atom {
                symbol,
                aromatic: false,
            }
        } else if c.is_ascii_lowercase() {
            // aromatic bracket atoms: single letter, plus "se"/"as"
            let two: String = self.chars[self.pos..].iter().take(2).collect();
            let symbol = if two == "se" || two == "as" {
                two
            } else {
                c.to_string()
            };
            self.pos += symbol.len();
            Atom {
                symbol,
                aromatic: true,
            }
        } else {
            return Err(self.unsupported(self.pos, c.to_string()));
        };
        while let Some(&c) = self.chars.get(self.pos) {
            match c {
                ']' => {
                    self.pos += 1;
                    return Ok(atom);
                }
                '@' | 'H' | '+' | '-' | ':' => self.pos += 1,
                d if d.is_ascii_digit() => self.pos += 1,
                other => return Err(self.unsupported(self.pos, other.to_string())),
            }
        }
        Err(self.unsupported(start, self.chars[start..].iter().collect::<String>()))
    }

    fn run(mut self) -> Result<SmilesMolecule, SmilesError> {
        while self.pos < self.chars.len() {
            let position = self.pos;
            let c = self.chars[position];
            match c {
                '(' => {
                    if self.prev.is_none() {
                        return Err(SmilesError::UnbalancedBranch { position });
                    }
                    self.branch_stack.push((self.prev, position));
                    self.pos += 1;
                }
                ')' => {
                    let (prev, _) = self
                        .branch_stack
                        .pop()
                        .ok_or(SmilesError::UnbalancedBranch { position })?;
                    self.prev = prev;
                    self.pending_bond = None;
                    self.pos += 1;
                }
                '-' | '/' | '\\' => {
                    self.pending_bond = Some(BondOrder::Single);
                    self.pos += 1;
                }
                '=' => {
                    self.pending_bond = Some(BondOrder::Double);
                    self.pos += 1;
                }
                '#' => {
                    self.pending_bond = Some(BondOrder::Triple);
                    self.pos += 1;
                }
                ':' => {
                    self.pending_bond = Some(BondOrder::Aromatic);
                    self.pos += 1;
                }
                '.' => {
                    if !self.branch_stack.is_empty() {
                        return Err(self.unsupported(position, "."));
                    }
                    self.prev = None;
                    self.pending_bond = None;
                    self.pos += 1;
                }
                '%' => {
                    let digits: String = self.chars[position + 1..].iter().take(2).collect();
                    if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                        return Err(self.unsupported(position, "%"));
                    }
                    self.pos += 3;
                    self.ring_closure(digits.parse().unwrap_or_default(), position)?;
                }
                d if d.is_ascii_digit() => {
                    self.pos += 1;
                    self.ring_closure(d.to_digit(10).unwrap_or_default(), position)?;
                }
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom)?;
                }
                _ => {
                    let two: String = self.chars[position..].iter().take(2).collect();
                    let atom = if ORGANIC_TWO.contains(&two.as_str()) {
                        self.pos += 2;
                        Atom {
                            symbol: two,
                            aromatic: false,
                        }
                    } else if ORGANIC_ONE.contains(&c) {
                        self.pos += 1;
                        Atom {
                            symbol: c.to_string(),
                            aromatic: false,
                        }
                    } else if AROMATIC_ONE.contains(&c) {
                        self.pos += 1;
                        Atom {
                            symbol: c.to_string(),
                            aromatic: true,
                        }
                    } else {
                        return Err(self.unsupported(position, c.to_string()));
                    };
                    self.push_atom(atom)?;
                }
            }
        }
        if let Some(&(_, position)) = self.branch_stack.last() {
            return Err(SmilesError::UnbalancedBranch { position });
        }
        if let Some((&digit, _)) = self.open_rings.iter().next() {
            return Err(SmilesError::UnclosedRing { digit });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::Empty);
        }
        Ok(SmilesMolecule {
            atoms: self.atoms,
            bonds: self.bonds,
            source: self.source.to_string(),
        })
    }
}

pub fn parse_smiles(s: &str) -> Result<SmilesMolecule, SmilesError> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::Empty);
    }
    Parser {
        chars: trimmed.chars().collect(),
        pos: 0,
        source: trimmed,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending_bond: None,
        branch_stack: Vec::new(),
        open_rings: BTreeMap::new(),
    }
    .run()
}

/// Topology graph of a molecule: one node per atom (element symbol as text), bond orders dropped.
pub fn to_graph(m: &SmilesMolecule, id: impl Into<String>) -> Result<Graph, GraphError> {
    let text = m.atoms.iter().map(|a| Some(a.symbol.clone())).collect();
    Ok(Graph::new(id, text, m.bonds.iter().map(|b| (b.a, b.b)))?
        .with_graph_text(Some(m.source.clone())))
}

/// Parses a SMILES string straight into a topology graph.
pub fn smiles_to_graph(s: &str, id: impl Into<String>) -> Result<Graph, SmilesError> {
    Ok(to_graph(&parse_smiles(s)?, id)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_chain() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.atoms.len(), 3);
        assert_eq!(m.bonds.len(), 2);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Single));
        let g = to_graph(&m, "x").unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.graph_text(), Some("CCO"));
    }

    #[test]
    fn ring_closure_bonds_first_and_last() {
        let m = parse_smiles("C1CC1").unwrap();
        assert_eq!(m.bonds.len(), 3);
        assert!(m.bonds.iter().any(|b| (b.a, b.b) == (0, 2)));
        let g = to_graph(&m, "x").unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn benzene_is_aromatic_six_cycle() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert!(m.atoms.iter().all(|a| a.aromatic));
        assert_eq!(m.bonds.len(), 6);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(m.ring_count(), 1);
    }

    #[test]
    fn single_atom() {
        let g = smiles_to_graph("C", "m").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
    }

    #[test]
    fn bond_orders_and_two_letter_atoms() {
        let m = parse_smiles("ClC=CC#N").unwrap();
        let symbols: Vec<_> = m.atoms.iter().map(|a| a.symbol.as_str()).collect();
        assert_eq!(symbols, ["Cl", "C", "C", "C", "N"]);
        let orders: Vec<_> = m.bonds.iter().map(|b| b.order).collect();
        assert_eq!(
            orders,
            [
                BondOrder::Single,
                BondOrder::Double,
                BondOrder::Single,
                BondOrder::Triple
            ]
        );
    }

    #[test]
    fn brackets_stereo_and_percent_rings() {
        let m = parse_smiles("[NH4+].[O-]C(=O)[C@@H](N)C%12CC%12").unwrap();
        assert_eq!(m.atoms[0].symbol, "N");
        assert_eq!(m.atoms.len(), 9);
        assert_eq!(m.ring_count(), 1);
        let m = parse_smiles("F/C=C\\F").unwrap();
        assert_eq!(m.bonds.len(), 3);
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(m.atoms[3].symbol, "n");
        assert_eq!(m.bonds.len(), 5);
    }

    #[test]
    fn branch_restores_attachment_point() {
        let m = parse_smiles("CC(C)(C)O").unwrap();
        let g = to_graph(&m, "t").unwrap();
        assert_eq!(g.degree(1), 4);
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnclosedRing { digit: 1 })
        );
        assert_eq!(
            parse_smiles("CC(C"),
            Err(SmilesError::UnbalancedBranch { position: 2 })
        );
        assert_eq!(
            parse_smiles("CC)C"),
            Err(SmilesError::UnbalancedBranch { position: 2 })
        );
        assert_eq!(
            parse_smiles("CCX"),
            Err(SmilesError::UnsupportedToken {
                position: 2,
                token: "X".into()
            })
        );
        assert_eq!(
            parse_smiles("C*C"),
            Err(SmilesError::UnsupportedToken {
                position: 1,
                token: "*".into()
            })
        );
        assert_eq!(parse_smiles("  "), Err(SmilesError::Empty));
        assert_eq!(parse_smiles("C1C1"), Err(SmilesError::DuplicateBond(0, 1)));
    }
}
