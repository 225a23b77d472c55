//! Weighted CFG data model, the `.wcfg` text format, and the
//! generating-nonterminal filter.
//!
//! A symbol is a nonterminal iff it occurs as the left-hand side of some
//! production in the owning grammar; everything else is a terminal.

use crate::error::{Error, Result};
use crate::semiring::Semiring;
use std::collections::HashMap;

/// Interned symbol id, valid within one `SymbolTable`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub u32);

#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    by_name: HashMap<String, Sym>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.by_name.get(name) {
            return s;
        }
        let s = Sym(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Sym> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Interns a name guaranteed not to collide with existing symbols,
    /// appending primes to the base until it is fresh.
    pub fn fresh(&mut self, base: &str) -> Sym {
        let mut name = base.to_string();
        while self.by_name.contains_key(&name) {
            name.push('\'');
        }
        self.intern(&name)
    }
}

#[derive(Clone, Debug)]
pub struct Production<W> {
    pub lhs: Sym,
    pub rhs: Vec<Sym>,
    pub weight: W,
}

impl<W> Production<W> {
    /// size = 1 + |rhs|
    pub fn size(&self) -> usize {
        1 + self.rhs.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeReport {
    pub total_size: usize,
    pub productions: usize,
    pub max_arity: usize,
    pub nonterminals: usize,
    pub terminals: usize,
}

#[derive(Clone, Debug)]
pub struct Grammar<W> {
    pub symbols: SymbolTable,
    productions: Vec<Production<W>>,
    pub start: Sym,
    nonterminal: Vec<bool>,
    rules_of: HashMap<Sym, Vec<usize>>,
}

impl<W: Semiring> Grammar<W> {
    /// Builds a grammar: merges duplicate (lhs, rhs) pairs by ⊕, drops
    /// zero-weight productions, and computes the derived indexes.
    pub fn new(symbols: SymbolTable, productions: Vec<Production<W>>, start: Sym) -> Self {
        let mut merged: Vec<Production<W>> = Vec::new();
        let mut at: HashMap<(Sym, Vec<Sym>), usize> = HashMap::new();
        for p in productions {
            match at.get(&(p.lhs, p.rhs.clone())) {
                Some(&i) => {
                    merged[i].weight = merged[i].weight.plus(&p.weight);
                }
                None => {
                    at.insert((p.lhs, p.rhs.clone()), merged.len());
                    merged.push(p);
                }
            }
        }
        merged.retain(|p| !p.weight.is_zero());

        let mut nonterminal = vec![false; symbols.len()];
        for p in &merged {
            nonterminal[p.lhs.0 as usize] = true;
        }
        let mut rules_of: HashMap<Sym, Vec<usize>> = HashMap::new();
        for (i, p) in merged.iter().enumerate() {
            rules_of.entry(p.lhs).or_default().push(i);
        }
        Grammar { symbols, productions: merged, start, nonterminal, rules_of }
    }

    pub fn productions(&self) -> &[Production<W>] {
        &self.productions
    }

    pub fn prod(&self, id: usize) -> &Production<W> {
        &self.productions[id]
    }

    pub fn rules_of(&self, a: Sym) -> &[usize] {
        self.rules_of.get(&a).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_nonterminal(&self, s: Sym) -> bool {
        self.nonterminal.get(s.0 as usize).copied().unwrap_or(false)
    }

    /// Nonterminals, in symbol order.
    pub fn nonterminals(&self) -> Vec<Sym> {
        (0..self.symbols.len() as u32)
            .map(Sym)
            .filter(|&s| self.is_nonterminal(s))
            .collect()
    }

    /// Weight of the production `start -> ε`, if present (the only nullary
    /// production a preprocessed grammar may contain).
    pub fn start_epsilon_weight(&self) -> W {
        for &r in self.rules_of(self.start) {
            if self.productions[r].rhs.is_empty() {
                return self.productions[r].weight.clone();
            }
        }
        W::zero()
    }

    pub fn size_report(&self) -> SizeReport {
        let mut nts = std::collections::HashSet::new();
        let mut ts = std::collections::HashSet::new();
        let mut total = 0;
        let mut max_arity = 0;
        for p in &self.productions {
            total += p.size();
            max_arity = max_arity.max(p.rhs.len());
            nts.insert(p.lhs);
            for &s in &p.rhs {
                if self.is_nonterminal(s) {
                    nts.insert(s);
                } else {
                    ts.insert(s);
                }
            }
        }
        SizeReport {
            total_size: total,
            productions: self.productions.len(),
            max_arity,
            nonterminals: nts.len(),
            terminals: ts.len(),
        }
    }

    /// Keeps exactly the productions all of whose nonterminals are
    /// generating, found by the usual fixed-point marking.
    pub fn filter_generating(&self) -> Grammar<W> {
        let mut generating = vec![false; self.symbols.len()];
        loop {
            let mut changed = false;
            for p in &self.productions {
                if generating[p.lhs.0 as usize] {
                    continue;
                }
                let ok = p
                    .rhs
                    .iter()
                    .all(|&s| !self.is_nonterminal(s) || generating[s.0 as usize]);
                if ok {
                    generating[p.lhs.0 as usize] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let keep: Vec<Production<W>> = self
            .productions
            .iter()
            .filter(|p| {
                generating[p.lhs.0 as usize]
                    && p.rhs
                        .iter()
                        .all(|&s| !self.is_nonterminal(s) || generating[s.0 as usize])
            })
            .cloned()
            .collect();
        let keep = if generating[self.start.0 as usize] { keep } else { Vec::new() };
        Grammar::new(self.symbols.clone(), keep, self.start)
    }

    /// Deterministic `.wcfg` text: start header, then productions sorted by
    /// lhs name, then rhs names.
    pub fn serialize(&self) -> String {
        let mut lines: Vec<(String, String, String)> = self
            .productions
            .iter()
            .map(|p| {
                let lhs = self.symbols.name(p.lhs).to_string();
                let rhs = p
                    .rhs
                    .iter()
                    .map(|&s| self.symbols.name(s))
                    .collect::<Vec<_>>()
                    .join(" ");
                (lhs, rhs, p.weight.display_weight())
            })
            .collect();
        lines.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let mut out = format!("start: {}\n", self.symbols.name(self.start));
        for (lhs, rhs, w) in lines {
            if rhs.is_empty() {
                out.push_str(&format!("{w} {lhs} ->\n"));
            } else {
                out.push_str(&format!("{w} {lhs} -> {rhs}\n"));
            }
        }
        out
    }
}

/// Parses the `.wcfg` text format. `#` starts a comment; an optional
/// `start: <symbol>` header names the start symbol (default: lhs of the
/// first production); production lines read `<weight> <lhs> -> <rhs...>`.
pub fn parse_grammar<W: Semiring>(text: &str) -> Result<Grammar<W>> {
    let mut symbols = SymbolTable::new();
    let mut productions: Vec<Production<W>> = Vec::new();
    let mut start: Option<Sym> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        if let Some(rest) = line.strip_prefix("start:") {
            let name = rest.trim();
            if name.is_empty() || name.split_whitespace().count() != 1 {
                return Err(Error::Syntax {
                    line: lineno,
                    reason: "start: header needs exactly one symbol".into(),
                });
            }
            if start.is_none() {
                start = Some(symbols.intern(name));
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 || toks[2] != "->" {
            return Err(Error::Syntax {
                line: lineno,
                reason: "expected `<weight> <lhs> -> <rhs...>`".into(),
            });
        }
        let weight = W::parse_weight(toks[0])
            .map_err(|reason| Error::BadWeight { line: lineno, reason })?;
        let lhs = symbols.intern(toks[1]);
        let rhs: Vec<Sym> = toks[3..].iter().map(|t| symbols.intern(t)).collect();
        if start.is_none() {
            start = Some(lhs);
        }
        // Zero-weight productions are dropped here rather than erroring, so
        // that e.g. boolean-0 lines can comment a rule out.
        if weight.is_zero() {
            continue;
        }
        productions.push(Production { lhs, rhs, weight });
    }

    let start = start.ok_or(Error::NoStart)?;
    let mut g = Grammar::new(symbols, productions, start);
    // Backpointer tokens are the final production ids; identity for all
    // semirings except Viterbi.
    for (i, p) in g.productions.iter_mut().enumerate() {
        p.weight = p.weight.attach_token(i as u32);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::{Boolean, Real};

    #[test]
    fn parses_a_minimal_grammar() {
        let g: Grammar<Real> = parse_grammar("start: S\n1.0 S -> a").unwrap();
        assert_eq!(g.size_report().total_size, 2);
        assert_eq!(g.size_report().productions, 1);
        assert_eq!(g.symbols.name(g.start), "S");
    }

    #[test]
    fn merges_duplicates_by_plus() {
        let g: Grammar<Real> = parse_grammar("0.25 S -> a\n0.25 S -> a").unwrap();
        assert_eq!(g.productions().len(), 1);
        assert!((g.prod(0).weight.0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nullary_rhs_allowed() {
        let g: Grammar<Real> = parse_grammar("0.5 S ->").unwrap();
        assert_eq!(g.prod(0).rhs.len(), 0);
        assert_eq!(g.prod(0).size(), 1);
    }

    #[test]
    fn start_defaults_to_first_lhs() {
        let g: Grammar<Real> = parse_grammar("1.0 X -> a\n1.0 S -> b").unwrap();
        assert_eq!(g.symbols.name(g.start), "X");
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            parse_grammar::<Real>("S -> a"),
            Err(Error::BadWeight { .. }) | Err(Error::Syntax { .. })
        ));
        assert!(matches!(parse_grammar::<Real>(""), Err(Error::NoStart)));
        assert!(matches!(
            parse_grammar::<Real>("-1.0 S -> a"),
            Err(Error::BadWeight { .. })
        ));
    }

    #[test]
    fn filter_generating_examples() {
        let g: Grammar<Real> = parse_grammar("1.0 S -> a").unwrap();
        assert_eq!(g.filter_generating().productions().len(), 1);

        let g: Grammar<Real> = parse_grammar("1.0 S -> A b\n1.0 A -> A").unwrap();
        assert_eq!(g.filter_generating().productions().len(), 0);

        let g: Grammar<Real> =
            parse_grammar("1.0 S -> A\n1.0 A -> a\n1.0 B -> B c").unwrap();
        let f = g.filter_generating();
        assert_eq!(f.productions().len(), 2);
        // idempotent
        assert_eq!(f.filter_generating().productions().len(), 2);
    }

    #[test]
    fn size_report_counts() {
        let g: Grammar<Real> = parse_grammar("1.0 S -> NP VP\n1.0 NP -> n").unwrap();
        let r = g.size_report();
        assert_eq!(r.total_size, 5);
        assert_eq!(r.productions, 2);
        assert_eq!(r.max_arity, 2);
    }

    #[test]
    fn serialize_roundtrip() {
        let text = "start: S\n0.5 S -> NP VP\n0.25 NP -> n\n0.75 VP -> v NP\n";
        let g: Grammar<Real> = parse_grammar(text).unwrap();
        let g2: Grammar<Real> = parse_grammar(&g.serialize()).unwrap();
        assert_eq!(g2.serialize(), g.serialize());
        assert_eq!(g2.productions().len(), g.productions().len());
    }

    #[test]
    fn boolean_weights() {
        let g: Grammar<Boolean> = parse_grammar("1 S -> a\n0 S -> b").unwrap();
        assert_eq!(g.productions().len(), 1);
    }
}
