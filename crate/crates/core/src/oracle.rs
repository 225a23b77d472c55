//! Brute-force reference implementations used by tests, the acceptance
//! suite, and the `--oracle-check` CLI flag: exhaustive derivation
//! enumeration, a CKY-style fixed-point inside computation that tolerates
//! ε-rules and unary cycles, truncated prefix sums, and rewrite checks.

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Sym};
use crate::semiring::{Real, Semiring};
use crate::transform::DIVERGENCE_BOUND;
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct DerivationTree {
    pub prod: usize,
    pub sym: Sym,
    pub children: Vec<TreeChild>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeChild {
    Leaf(Sym),
    Node(DerivationTree),
}

impl DerivationTree {
    pub fn bracketed<W: Semiring>(&self, g: &Grammar<W>) -> String {
        let mut out = String::new();
        self.write(g, &mut out);
        out
    }

    fn write<W: Semiring>(&self, g: &Grammar<W>, out: &mut String) {
        out.push('(');
        out.push_str(g.symbols.name(self.sym));
        for c in &self.children {
            out.push(' ');
            match c {
                TreeChild::Leaf(s) => out.push_str(g.symbols.name(*s)),
                TreeChild::Node(t) => t.write(g, out),
            }
        }
        out.push(')');
    }
}

/// Maps tokens to symbol ids; unknown tokens map to None and can never match.
pub fn lookup_tokens<W: Semiring>(g: &Grammar<W>, x: &[&str]) -> Vec<Option<Sym>> {
    x.iter().map(|t| g.symbols.get(t)).collect()
}

struct Enumerator<'g, W: Semiring> {
    g: &'g Grammar<W>,
    x: Vec<Option<Sym>>,
    memo: HashMap<(Sym, usize, usize), Vec<(DerivationTree, W)>>,
    in_progress: std::collections::HashSet<(Sym, usize, usize)>,
    depth_cap: usize,
    nullable: HashMap<Sym, bool>,
}

/// Nonterminals that can derive ε (structurally, ignoring weights).
fn nullable_set<W: Semiring>(g: &Grammar<W>) -> HashMap<Sym, bool> {
    let mut nullable: HashMap<Sym, bool> =
        g.nonterminals().into_iter().map(|a| (a, false)).collect();
    loop {
        let mut changed = false;
        for p in g.productions() {
            if nullable[&p.lhs] {
                continue;
            }
            if p.rhs.iter().all(|s| *nullable.get(s).unwrap_or(&false)) {
                nullable.insert(p.lhs, true);
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

impl<'g, W: Semiring> Enumerator<'g, W> {
    fn derivs(&mut self, a: Sym, i: usize, j: usize, depth: usize) -> Result<Vec<(DerivationTree, W)>> {
        if let Some(v) = self.memo.get(&(a, i, j)) {
            return Ok(v.clone());
        }
        if depth > self.depth_cap || !self.in_progress.insert((a, i, j)) {
            return Err(Error::Infinite(format!(
                "unbounded derivations of {} over ({i},{j})",
                self.g.symbols.name(a)
            )));
        }
        let mut out = Vec::new();
        for &r in self.g.rules_of(a) {
            let rhs = self.g.prod(r).rhs.clone();
            let w = self.g.prod(r).weight.clone();
            for (children, cw) in self.seq(&rhs, i, j, depth + 1)? {
                out.push((
                    DerivationTree { prod: r, sym: a, children },
                    w.times(&cw),
                ));
            }
        }
        self.in_progress.remove(&(a, i, j));
        self.memo.insert((a, i, j), out.clone());
        Ok(out)
    }

    fn seq(
        &mut self,
        rho: &[Sym],
        i: usize,
        j: usize,
        depth: usize,
    ) -> Result<Vec<(Vec<TreeChild>, W)>> {
        let Some((&head, rest)) = rho.split_first() else {
            return Ok(if i == j { vec![(Vec::new(), W::one())] } else { Vec::new() });
        };
        let mut out = Vec::new();
        if self.g.is_nonterminal(head) {
            // span bounds: skip empty spans for non-nullable symbols and
            // reserve room for the non-nullable remainder, so the recursion
            // only re-enters the same (A,i,j) on a genuine ε/unary cycle
            let lo = if self.nullable[&head] { i } else { i + 1 };
            let reserve: usize = rest
                .iter()
                .filter(|s| !*self.nullable.get(s).unwrap_or(&false))
                .count();
            let hi = j.saturating_sub(reserve);
            for m in lo..=hi {
                let heads = self.derivs(head, i, m, depth)?;
                if heads.is_empty() {
                    continue;
                }
                for (tail, tw) in self.seq(rest, m, j, depth)? {
                    for (t, w) in &heads {
                        let mut children = vec![TreeChild::Node(t.clone())];
                        children.extend(tail.iter().cloned());
                        out.push((children, w.times(&tw)));
                    }
                }
            }
        } else if i < j && self.x[i] == Some(head) {
            for (tail, tw) in self.seq(rest, i + 1, j, depth)? {
                let mut children = vec![TreeChild::Leaf(head)];
                children.extend(tail);
                out.push((children, tw));
            }
        }
        Ok(out)
    }
}

/// All derivation trees with yield x, each with its product weight. Requires
/// finitely many derivations (preprocessed grammar); cycles and runaway depth
/// are reported as `Infinite`.
pub fn enumerate_derivations<W: Semiring>(
    g: &Grammar<W>,
    x: &[&str],
) -> Result<Vec<(DerivationTree, W)>> {
    let toks = lookup_tokens(g, x);
    let nts = g.nonterminals().len();
    let mut e = Enumerator {
        g,
        x: toks,
        memo: HashMap::new(),
        in_progress: Default::default(),
        depth_cap: 2 * (x.len() + 1) * (nts + 1),
        nullable: nullable_set(g),
    };
    e.derivs(g.start, 0, x.len(), 0)
}

/// ⊕-sum of all derivation weights: the oracle's Z_x.
pub fn derivation_sum<W: Semiring>(g: &Grammar<W>, x: &[&str]) -> Result<W> {
    Ok(enumerate_derivations(g, x)?
        .into_iter()
        .fold(W::zero(), |acc, (_, w)| acc.plus(&w)))
}

/// Inside weight of x by fixed-point iteration over span equations. Unlike
/// the engines and the enumerator this tolerates ε-rules and unary cycles,
/// converging to the (possibly truncated-in-the-limit) derivation sum; each
/// iteration adds the derivations of the next height.
pub fn fixed_point_inside<W: Semiring>(
    g: &Grammar<W>,
    x: &[&str],
    tol: f64,
    max_iters: usize,
) -> Result<W> {
    let toks = lookup_tokens(g, x);
    let n = x.len();
    let nts = g.nonterminals();
    let mut inside: HashMap<(Sym, usize, usize), W> = HashMap::new();
    for &a in &nts {
        for i in 0..=n {
            for j in i..=n {
                inside.insert((a, i, j), W::zero());
            }
        }
    }
    for _ in 0..max_iters {
        let mut max_delta = 0.0f64;
        let mut next = inside.clone();
        for &a in &nts {
            for i in 0..=n {
                for j in i..=n {
                    let mut acc = W::zero();
                    for &r in g.rules_of(a) {
                        let p = g.prod(r);
                        // ways[t][m]: weight of rho[0..t] =>* x[i..m]
                        let mut ways = vec![W::zero(); j - i + 1];
                        ways[0] = W::one();
                        for &s in &p.rhs {
                            let mut nw = vec![W::zero(); j - i + 1];
                            for (mi, w0) in ways.iter().enumerate() {
                                if w0.is_zero() {
                                    continue;
                                }
                                let m = i + mi;
                                if g.is_nonterminal(s) {
                                    for m2 in m..=j {
                                        let t = w0.times(&inside[&(s, m, m2)]);
                                        nw[m2 - i] = nw[m2 - i].plus(&t);
                                    }
                                } else if m < j && toks[m] == Some(s) {
                                    nw[m + 1 - i] = nw[m + 1 - i].plus(w0);
                                }
                            }
                            ways = nw;
                        }
                        acc = acc.plus(&p.weight.times(&ways[j - i]));
                    }
                    if acc.magnitude() > DIVERGENCE_BOUND {
                        return Err(Error::NonConvergent(
                            "inside fixed point exceeded the divergence bound".into(),
                        ));
                    }
                    max_delta = max_delta.max(acc.distance(&inside[&(a, i, j)]));
                    next.insert((a, i, j), acc);
                }
            }
        }
        inside = next;
        if max_delta < tol {
            break;
        }
    }
    Ok(inside[&(g.start, 0, n)].clone())
}

#[derive(Clone, Copy, Debug)]
pub struct TruncatedPrefix {
    /// Sum of Z_{yz} over completions with |yz| <= horizon.
    pub lower: Real,
    /// Exact prefix weight when the grammar is one of the closed-form
    /// geometric test families.
    pub exact: Option<Real>,
}

/// Truncated prefix weight of y under the probability carrier, by exhaustive
/// enumeration of completions up to the horizon.
pub fn truncated_prefix_weight(g: &Grammar<Real>, y: &[&str], horizon: usize) -> TruncatedPrefix {
    let mut terminals: Vec<String> = Vec::new();
    for p in g.productions() {
        for &s in &p.rhs {
            if !g.is_nonterminal(s) {
                let name = g.symbols.name(s).to_string();
                if !terminals.contains(&name) {
                    terminals.push(name);
                }
            }
        }
    }
    terminals.sort();

    let mut lower = Real::zero();
    let mut frontier: Vec<Vec<String>> = vec![y.iter().map(|s| s.to_string()).collect()];
    while let Some(sent) = frontier.pop() {
        if sent.len() > horizon {
            continue;
        }
        let refs: Vec<&str> = sent.iter().map(String::as_str).collect();
        if let Ok(z) = derivation_sum(g, &refs) {
            lower = lower.plus(&z);
        }
        if sent.len() < horizon {
            for t in &terminals {
                let mut ext = sent.clone();
                ext.push(t.clone());
                frontier.push(ext);
            }
        }
    }

    TruncatedPrefix { lower, exact: geometric_family_prefix(g, y) }
}

/// Exact prefix weight for the two geometric test families
/// {S→a S w1, S→a w2} and {S→S a w1, S→a w2}: for y = a^k with k >= 1, the
/// prefix weight is w1^{k-1} w2 / (1 - w1).
fn geometric_family_prefix(g: &Grammar<Real>, y: &[&str]) -> Option<Real> {
    if g.productions().len() != 2 {
        return None;
    }
    let s = g.start;
    let mut w1 = None;
    let mut w2 = None;
    let mut term = None;
    for p in g.productions() {
        if p.lhs != s {
            return None;
        }
        match p.rhs.as_slice() {
            [a] if !g.is_nonterminal(*a) => {
                w2 = Some(p.weight.0);
                term = Some(*a);
            }
            [a, b] if *a == s && !g.is_nonterminal(*b) => w1 = Some((p.weight.0, *b)),
            [a, b] if *b == s && !g.is_nonterminal(*a) => w1 = Some((p.weight.0, *a)),
            _ => return None,
        }
    }
    let (w1, a1) = w1?;
    let (w2, a2) = (w2?, term?);
    if a1 != a2 || w1 >= 1.0 {
        return None;
    }
    let k = y.len();
    if k == 0 || y.iter().any(|t| g.symbols.get(t) != Some(a1)) {
        return Some(Real(w2 / (1.0 - w1))); // total language weight
    }
    Some(Real(w1.powi(k as i32 - 1) * w2 / (1.0 - w1)))
}

/// True iff mu =>* x. Handles cyclic grammars via a boolean fixed point.
pub fn rewrites_check<W: Semiring>(g: &Grammar<W>, mu: &[Sym], x: &[&str]) -> bool {
    let toks = lookup_tokens(g, x);
    let n = x.len();
    let nts = g.nonterminals();
    let mut derives: HashMap<(Sym, usize, usize), bool> = HashMap::new();
    for &a in &nts {
        for i in 0..=n {
            for j in i..=n {
                derives.insert((a, i, j), false);
            }
        }
    }
    let seq_matches = |derives: &HashMap<(Sym, usize, usize), bool>,
                       rho: &[Sym],
                       i: usize,
                       j: usize| {
        // reachable[m]: prefix of rho consumed x[i..m]
        let mut reach = vec![false; n + 2];
        reach[i] = true;
        for &s in rho {
            let mut next = vec![false; n + 2];
            for m in i..=j {
                if !reach[m] {
                    continue;
                }
                if g.is_nonterminal(s) {
                    for m2 in m..=j {
                        if derives[&(s, m, m2)] {
                            next[m2] = true;
                        }
                    }
                } else if m < j && toks[m] == Some(s) {
                    next[m + 1] = true;
                }
            }
            reach = next;
        }
        reach[j]
    };
    loop {
        let mut changed = false;
        for &a in &nts {
            for i in 0..=n {
                for j in i..=n {
                    if derives[&(a, i, j)] {
                        continue;
                    }
                    let ok = g
                        .rules_of(a)
                        .iter()
                        .any(|&r| seq_matches(&derives, &g.prod(r).rhs, i, j));
                    if ok {
                        derives.insert((a, i, j), true);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    seq_matches(&derives, mu, 0, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    const G1: &str = "1.0 S -> NP VP\n0.5 NP -> det n\n0.5 NP -> n\n1.0 VP -> v NP";

    fn real(text: &str) -> Grammar<Real> {
        parse_grammar(text).unwrap()
    }

    #[test]
    fn g1_has_one_derivation() {
        let g = real(G1);
        let trees = enumerate_derivations(&g, &["det", "n", "v", "n"]).unwrap();
        assert_eq!(trees.len(), 1);
        assert!((trees[0].1 .0 - 0.25).abs() < 1e-12);
        assert_eq!(trees[0].0.bracketed(&g), "(S (NP det n) (VP v (NP n)))");
    }

    #[test]
    fn ambiguous_grammar_sums_both_trees() {
        let g = real("0.2 S -> S S\n0.8 S -> a");
        let trees = enumerate_derivations(&g, &["a", "a", "a"]).unwrap();
        assert_eq!(trees.len(), 2);
        let z = derivation_sum(&g, &["a", "a", "a"]).unwrap();
        assert!((z.0 - 0.04096).abs() < 1e-12);
    }

    #[test]
    fn unknown_token_is_zero() {
        let g = real(G1);
        assert!(derivation_sum(&g, &["q"]).unwrap().is_zero());
    }

    #[test]
    fn cyclic_grammar_detected() {
        let g = real("1.0 S -> S\n1.0 S -> a");
        assert!(matches!(
            enumerate_derivations(&g, &["a"]),
            Err(Error::Infinite(_))
        ));
    }

    #[test]
    fn order_invariance() {
        let a = real("0.2 S -> S S\n0.8 S -> a");
        let b = real("0.8 S -> a\n0.2 S -> S S\nstart: S");
        let x = ["a", "a", "a", "a"];
        let za = derivation_sum(&a, &x).unwrap();
        let zb = derivation_sum(&b, &x).unwrap();
        assert!((za.0 - zb.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_inside_matches_enumeration() {
        let g = real("0.2 S -> S S\n0.8 S -> a");
        let x = ["a", "a", "a"];
        let fp = fixed_point_inside(&g, &x, 1e-13, 10_000).unwrap();
        assert!((fp.0 - 0.04096).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_inside_handles_cycles_and_epsilon() {
        // S -> A S | b | eps, with a unary A-cycle
        let g = real(
            "start: S\n0.5 S -> A S\n0.3 S -> b\n0.1 S ->\n0.4 A -> B\n0.4 B -> A\n0.2 A -> a",
        );
        let z = fixed_point_inside(&g, &["a", "b"], 1e-14, 100_000).unwrap();
        // derivations: S -> A S with A =>* a (through any number of A->B->A
        // loops) and S -> b; A =>* a weight = 0.2/(1-0.16)
        let expect = 0.5 * (0.2 / (1.0 - 0.16)) * 0.3;
        assert!((z.0 - expect).abs() < 1e-9);
    }

    #[test]
    fn truncated_prefix_geometric() {
        let g5 = real("0.5 S -> a S\n0.5 S -> a");
        let tp = truncated_prefix_weight(&g5, &["a"], 12);
        assert!((tp.lower.0 - (1.0 - 0.5f64.powi(12))).abs() < 1e-12);
        assert!((tp.exact.unwrap().0 - 1.0).abs() < 1e-12);

        let g4 = real("0.5 S -> S a\n0.5 S -> a");
        let tp = truncated_prefix_weight(&g4, &["a", "a"], 12);
        assert!((tp.lower.0 - 0.5).abs() < 1e-3);
        assert!((tp.exact.unwrap().0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rewrites_examples() {
        let g = real(G1);
        let np = g.symbols.get("NP").unwrap();
        let vp = g.symbols.get("VP").unwrap();
        assert!(rewrites_check(&g, &[np], &["det", "n"]));
        assert!(!rewrites_check(&g, &[vp], &["det"]));
        assert!(rewrites_check(&g, &[], &[]));
    }
}
