//! Grammar preprocessing: null weights, nullary elimination, unary-chain
//! closure and cycle elimination, free weights, left-corner closure, and
//! suffix products.
//!
//! The pipeline order matters: nullary elimination must run before unary
//! handling, since removing ε-rules can create new unary productions.
//!
//! Fresh symbols are suffixed with reserved markers: `@ne` for the
//! non-ε restriction of a nullable nonterminal, `@s` for the fresh start
//! symbol, `@up`/`@dn` for the two halves of a nonterminal split out of a
//! unary cycle.

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Production, Sym};
use crate::graph::{kleene_closure, sccs};
use crate::semiring::Semiring;
use std::collections::{HashMap, HashSet};

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERS: usize = 100_000;
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Everything the engines precompute per grammar.
#[derive(Clone, Debug)]
pub struct ClosureTables<W> {
    /// e_A on the filtered input grammar (before nullary elimination).
    pub null_weight: HashMap<Sym, W>,
    /// Z_A on the final preprocessed grammar.
    pub free_weight: HashMap<Sym, W>,
    /// w(A =>* B) for same-SCC pairs of the unary graph (after nullary
    /// elimination, before the cycle split).
    pub unary_chain: HashMap<(Sym, Sym), W>,
    /// w(C =>*_lc B) on the final grammar: full reflexive-transitive
    /// left-corner closure, assembled from per-SCC closures over the
    /// condensation.
    pub left_corner: HashMap<(Sym, Sym), W>,
    /// Z_nu keyed by (production id, dot position) on the final grammar.
    pub suffix_product: HashMap<(usize, usize), W>,
}

fn fixed_point<W: Semiring>(
    g: &Grammar<W>,
    skip_terminal_rules: bool,
    what: &str,
) -> Result<HashMap<Sym, W>> {
    let nts = g.nonterminals();
    let mut val: HashMap<Sym, W> = nts.iter().map(|&a| (a, W::zero())).collect();
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let mut max_delta = 0.0f64;
        let mut next: HashMap<Sym, W> = HashMap::with_capacity(nts.len());
        for &a in &nts {
            let mut acc = W::zero();
            'rules: for &r in g.rules_of(a) {
                let p = g.prod(r);
                let mut term = p.weight.clone();
                for &s in &p.rhs {
                    if g.is_nonterminal(s) {
                        term = term.times(&val[&s]);
                    } else if skip_terminal_rules {
                        continue 'rules;
                    }
                }
                acc = acc.plus(&term);
            }
            if acc.magnitude() > DIVERGENCE_BOUND {
                return Err(Error::NonConvergent(format!(
                    "{what}: value for {} exceeded the divergence bound",
                    g.symbols.name(a)
                )));
            }
            max_delta = max_delta.max(acc.distance(&val[&a]));
            next.insert(a, acc);
        }
        val = next;
        if max_delta < FIXED_POINT_TOL {
            return Ok(val);
        }
    }
    Err(Error::NonConvergent(format!("{what}: iteration cap reached")))
}

/// Minimal solution of e_A = ⊕ w(A→B1…Bn) ⊗ ∏ e_Bi over the rules whose
/// right-hand sides contain no terminals, by fixed-point iteration from zero.
pub fn null_weights<W: Semiring>(g: &Grammar<W>) -> Result<HashMap<Sym, W>> {
    fixed_point(g, true, "null_weights")
}

/// Z_A: total weight of all subtrees rooted at A (terminals contribute 1̄).
pub fn free_weights<W: Semiring>(g: &Grammar<W>) -> Result<HashMap<Sym, W>> {
    fixed_point(g, false, "free_weights")
}

/// Splits every production around its nullable nonterminals (2^k variants,
/// merged by ⊕), restricts kept nullable occurrences to fresh non-ε
/// nonterminals, and rebuilds the start so the only remaining nullary
/// production is `start -> ε`. Sentence weights are preserved for all x ≠ ε,
/// and Z_ε survives as the new start's ε-rule weight.
pub fn eliminate_nullary<W: Semiring>(g: &Grammar<W>) -> Result<Grammar<W>> {
    let e = null_weights(g)?;
    let nullable: HashSet<Sym> = e
        .iter()
        .filter(|(_, w)| !w.is_zero())
        .map(|(&a, _)| a)
        .collect();
    if nullable.is_empty() {
        return Ok(g.clone());
    }

    let mut symbols = g.symbols.clone();
    let rename: HashMap<Sym, Sym> = nullable
        .iter()
        .map(|&a| {
            let fresh = symbols.fresh(&format!("{}@ne", g.symbols.name(a)));
            (a, fresh)
        })
        .collect();
    let keep_name = |s: Sym| *rename.get(&s).unwrap_or(&s);

    let mut out: Vec<Production<W>> = Vec::new();
    for p in g.productions() {
        if p.rhs.is_empty() {
            continue;
        }
        let null_pos: Vec<usize> = p
            .rhs
            .iter()
            .enumerate()
            .filter(|(_, s)| nullable.contains(s))
            .map(|(i, _)| i)
            .collect();
        let k = null_pos.len();
        for mask in 0u64..(1u64 << k) {
            let mut w = p.weight.clone();
            let mut rhs = Vec::new();
            for (i, &s) in p.rhs.iter().enumerate() {
                match null_pos.iter().position(|&q| q == i) {
                    Some(b) if mask & (1 << b) != 0 => {
                        w = w.times(&e[&s]); // dropped occurrence
                    }
                    Some(_) => rhs.push(keep_name(s)),
                    None => rhs.push(s),
                }
            }
            if rhs.is_empty() {
                continue; // fully nulled variant: accounted for by e elsewhere
            }
            out.push(Production { lhs: keep_name(p.lhs), rhs, weight: w });
        }
    }

    let mut start = keep_name(g.start);
    if nullable.contains(&g.start) {
        let e_s = e[&g.start].clone();
        let s_new = symbols.fresh(&format!("{}@s", g.symbols.name(g.start)));
        out.push(Production { lhs: s_new, rhs: vec![keep_name(g.start)], weight: W::one() });
        out.push(Production { lhs: s_new, rhs: vec![], weight: e_s });
        start = s_new;
    }

    // Nonterminals that could only rewrite to ε now expand to nothing; the
    // variants that kept them are dead and must go, or their fresh names
    // would read as terminals under the structural nonterminal test.
    loop {
        let live: HashSet<Sym> = out.iter().map(|p| p.lhs).collect();
        let dead: HashSet<Sym> = rename
            .values()
            .copied()
            .filter(|s| !live.contains(s))
            .collect();
        let before = out.len();
        out.retain(|p| p.rhs.iter().all(|s| !dead.contains(s)));
        if out.len() == before {
            break;
        }
    }
    Ok(Grammar::new(symbols, out, start).filter_generating())
}

/// SCC decomposition of the unary-production graph plus all within-SCC chain
/// weights w(A =>* B), reflexive entries included.
#[derive(Clone, Debug)]
pub struct UnaryScc<W> {
    pub scc_id: HashMap<Sym, usize>,
    pub members: Vec<Vec<Sym>>,
    /// true if the component has more than one node or a self-loop
    pub nontrivial: Vec<bool>,
    pub chains: HashMap<(Sym, Sym), W>,
}

impl<W> UnaryScc<W> {
    pub fn same_scc(&self, a: Sym, b: Sym) -> bool {
        match (self.scc_id.get(&a), self.scc_id.get(&b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn in_nontrivial(&self, a: Sym) -> bool {
        self.scc_id.get(&a).is_some_and(|&i| self.nontrivial[i])
    }
}

pub fn unary_closure<W: Semiring>(g: &Grammar<W>) -> Result<UnaryScc<W>> {
    for p in g.productions() {
        if p.rhs.is_empty() && p.lhs != g.start {
            return Err(Error::Precondition(
                "unary_closure requires a grammar without nullary productions".into(),
            ));
        }
    }
    let nts = g.nonterminals();
    let idx: HashMap<Sym, usize> = nts.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut edges: HashMap<(usize, usize), W> = HashMap::new();
    for p in g.productions() {
        if p.rhs.len() == 1 && g.is_nonterminal(p.rhs[0]) {
            let key = (idx[&p.lhs], idx[&p.rhs[0]]);
            let cur = edges.remove(&key).unwrap_or_else(W::zero);
            edges.insert(key, cur.plus(&p.weight));
        }
    }
    let edge_list: Vec<(usize, usize)> = edges.keys().copied().collect();
    let comps = sccs(nts.len(), &edge_list);

    let mut scc_id = HashMap::new();
    let mut members = Vec::new();
    let mut nontrivial = Vec::new();
    let mut chains = HashMap::new();
    for (ci, comp) in comps.iter().enumerate() {
        let syms: Vec<Sym> = comp.iter().map(|&i| nts[i]).collect();
        for &s in &syms {
            scc_id.insert(s, ci);
        }
        let has_loop = comp.iter().any(|&i| edges.contains_key(&(i, i)));
        nontrivial.push(comp.len() > 1 || has_loop);
        let n = comp.len();
        let mut mat = vec![vec![W::zero(); n]; n];
        for (a, &ia) in comp.iter().enumerate() {
            for (b, &ib) in comp.iter().enumerate() {
                if let Some(w) = edges.get(&(ia, ib)) {
                    mat[a][b] = w.clone();
                }
            }
        }
        let closed = kleene_closure(mat)?;
        for (a, &sa) in syms.iter().enumerate() {
            for (b, &sb) in syms.iter().enumerate() {
                if !closed[a][b].is_zero() {
                    chains.insert((sa, sb), closed[a][b].clone());
                }
            }
        }
        members.push(syms);
    }
    Ok(UnaryScc { scc_id, members, nontrivial, chains })
}

/// The split construction: each nonterminal A in a cyclic unary component
/// becomes A@up / A@dn with chain rules A@up -> B@dn weighted w(A =>* B);
/// every non-collapsed rule A→ρ is relabeled A@dn → ρ with rhs nonterminals
/// sent to their @up halves. Trivial loop-free components keep their names.
pub fn eliminate_unary_cycles<W: Semiring>(g: &Grammar<W>) -> Result<Grammar<W>> {
    let u = unary_closure(g)?;
    eliminate_unary_cycles_with(g, &u)
}

pub fn eliminate_unary_cycles_with<W: Semiring>(g: &Grammar<W>, u: &UnaryScc<W>) -> Result<Grammar<W>> {
    if !u.nontrivial.iter().any(|&b| b) {
        return Ok(g.clone());
    }
    let mut symbols = g.symbols.clone();
    let mut up: HashMap<Sym, Sym> = HashMap::new();
    let mut dn: HashMap<Sym, Sym> = HashMap::new();
    for &a in u.scc_id.keys() {
        if u.in_nontrivial(a) {
            up.insert(a, symbols.fresh(&format!("{}@up", g.symbols.name(a))));
            dn.insert(a, symbols.fresh(&format!("{}@dn", g.symbols.name(a))));
        } else {
            up.insert(a, a);
            dn.insert(a, a);
        }
    }

    let collapsed = |p: &Production<W>| {
        p.rhs.len() == 1
            && g.is_nonterminal(p.rhs[0])
            && u.same_scc(p.lhs, p.rhs[0])
            && u.in_nontrivial(p.lhs)
    };
    // A @dn half only exists if some rule survives the collapse for it.
    let has_dn: HashSet<Sym> = g
        .productions()
        .iter()
        .filter(|p| !collapsed(p))
        .map(|p| p.lhs)
        .collect();

    let mut out: Vec<Production<W>> = Vec::new();
    for ((a, b), w) in &u.chains {
        if u.in_nontrivial(*a) && has_dn.contains(b) {
            out.push(Production { lhs: up[a], rhs: vec![dn[b]], weight: w.clone() });
        }
    }
    for p in g.productions() {
        if collapsed(p) {
            continue;
        }
        let rhs = p
            .rhs
            .iter()
            .map(|&s| if g.is_nonterminal(s) { up[&s] } else { s })
            .collect();
        out.push(Production { lhs: dn[&p.lhs], rhs, weight: p.weight.clone() });
    }
    // Fresh halves that ended up ruleless (their nonterminal only derived
    // infinite chains) must not leak into right-hand sides as terminals.
    let fresh: HashSet<Sym> = up
        .iter()
        .chain(dn.iter())
        .filter(|(orig, half)| orig != half)
        .map(|(_, &half)| half)
        .collect();
    loop {
        let live: HashSet<Sym> = out.iter().map(|p| p.lhs).collect();
        let before = out.len();
        out.retain(|p| {
            p.rhs
                .iter()
                .all(|s| !fresh.contains(s) || live.contains(s))
        });
        if out.len() == before {
            break;
        }
    }
    let start = *up.get(&g.start).unwrap_or(&g.start);
    Ok(Grammar::new(symbols, out, start))
}

/// Full left-corner closure w(C =>*_lc B): the multigraph has one edge per
/// production A → B ρ with nonterminal left child B, weighted by the
/// production weight times the free weights of the other nonterminal rhs
/// symbols. Per-SCC star closures are extended across the condensation DAG.
pub fn left_corner_closure<W: Semiring>(
    g: &Grammar<W>,
    free: &HashMap<Sym, W>,
) -> Result<HashMap<(Sym, Sym), W>> {
    let nts = g.nonterminals();
    let idx: HashMap<Sym, usize> = nts.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut edges: HashMap<(usize, usize), W> = HashMap::new();
    for p in g.productions() {
        let Some(&first) = p.rhs.first() else { continue };
        if !g.is_nonterminal(first) {
            continue;
        }
        let mut w = p.weight.clone();
        for &s in &p.rhs[1..] {
            if g.is_nonterminal(s) {
                w = w.times(&free[&s]);
            }
        }
        let key = (idx[&p.lhs], idx[&first]);
        let cur = edges.remove(&key).unwrap_or_else(W::zero);
        edges.insert(key, cur.plus(&w));
    }
    let edge_list: Vec<(usize, usize)> = edges.keys().copied().collect();
    let comps = sccs(nts.len(), &edge_list);
    let scc_of: HashMap<usize, usize> = comps
        .iter()
        .enumerate()
        .flat_map(|(ci, comp)| comp.iter().map(move |&v| (v, ci)))
        .collect();

    // Full closure, sparse: R[c] lists (target, weight). Components arrive
    // sinks-first, so cross edges always point at finished components.
    let mut full: HashMap<usize, Vec<(usize, W)>> = HashMap::new();
    for comp in &comps {
        let n = comp.len();
        let mut mat = vec![vec![W::zero(); n]; n];
        for (a, &ia) in comp.iter().enumerate() {
            for (b, &ib) in comp.iter().enumerate() {
                if let Some(w) = edges.get(&(ia, ib)) {
                    mat[a][b] = w.clone();
                }
            }
        }
        let closed = kleene_closure(mat)?;
        for (a, &ia) in comp.iter().enumerate() {
            let mut row: HashMap<usize, W> = HashMap::new();
            for (b, &ib) in comp.iter().enumerate() {
                if !closed[a][b].is_zero() {
                    row.insert(ib, closed[a][b].clone());
                }
            }
            // within-closure to an exit node, a cross edge, then anything
            // reachable from the far side
            for (b, &ib) in comp.iter().enumerate() {
                if closed[a][b].is_zero() {
                    continue;
                }
                for (&(src, dst), w) in &edges {
                    if src != ib || scc_of[&dst] == scc_of[&ia] {
                        continue;
                    }
                    let lead = closed[a][b].times(w);
                    for (tgt, wt) in full.get(&dst).into_iter().flatten() {
                        let add = lead.times(wt);
                        let cur = row.remove(tgt).unwrap_or_else(W::zero);
                        row.insert(*tgt, cur.plus(&add));
                    }
                }
            }
            full.insert(ia, row.into_iter().collect());
        }
    }

    let mut out = HashMap::new();
    for (src, row) in full {
        for (tgt, w) in row {
            if !w.is_zero() {
                out.insert((nts[src], nts[tgt]), w);
            }
        }
    }
    Ok(out)
}

/// Z_nu for every production and dot position: the product of free weights of
/// the nonterminals in the suffix after the dot.
pub fn suffix_products<W: Semiring>(
    g: &Grammar<W>,
    free: &HashMap<Sym, W>,
) -> HashMap<(usize, usize), W> {
    let mut out = HashMap::new();
    for (r, p) in g.productions().iter().enumerate() {
        let mut acc = W::one();
        out.insert((r, p.rhs.len()), acc.clone());
        for d in (0..p.rhs.len()).rev() {
            let s = p.rhs[d];
            if g.is_nonterminal(s) {
                acc = acc.times(&free[&s]);
            }
            out.insert((r, d), acc.clone());
        }
    }
    out
}

/// Terminals reachable as extended left corners of each nonterminal
/// (B =>*_lc a), used by the one-word lookahead filter. Unweighted.
pub fn extended_left_corner_terminals<W: Semiring>(g: &Grammar<W>) -> HashMap<Sym, HashSet<Sym>> {
    let nts = g.nonterminals();
    let mut first: HashMap<Sym, HashSet<Sym>> =
        nts.iter().map(|&a| (a, HashSet::new())).collect();
    loop {
        let mut changed = false;
        for p in g.productions() {
            let Some(&head) = p.rhs.first() else { continue };
            let add: Vec<Sym> = if g.is_nonterminal(head) {
                first[&head].iter().copied().collect()
            } else {
                vec![head]
            };
            let set = first.get_mut(&p.lhs).unwrap();
            for a in add {
                changed |= set.insert(a);
            }
        }
        if !changed {
            break;
        }
    }
    first
}

/// Longest-path height of each nonterminal in the unary-production graph.
/// Errors if the graph still has a cycle (the engines require preprocessed
/// input).
pub fn unary_heights<W: Semiring>(g: &Grammar<W>) -> Result<HashMap<Sym, u32>> {
    let nts = g.nonterminals();
    let mut height: HashMap<Sym, u32> = HashMap::new();
    let mut visiting: HashSet<Sym> = HashSet::new();

    fn visit<W: Semiring>(
        g: &Grammar<W>,
        a: Sym,
        height: &mut HashMap<Sym, u32>,
        visiting: &mut HashSet<Sym>,
    ) -> Result<u32> {
        if let Some(&h) = height.get(&a) {
            return Ok(h);
        }
        if !visiting.insert(a) {
            return Err(Error::Precondition(format!(
                "unary cycle through {} (run preprocessing first)",
                g.symbols.name(a)
            )));
        }
        let mut h = 0;
        for &r in g.rules_of(a) {
            let p = g.prod(r);
            if p.rhs.len() == 1 && g.is_nonterminal(p.rhs[0]) {
                h = h.max(1 + visit(g, p.rhs[0], height, visiting)?);
            }
        }
        visiting.remove(&a);
        height.insert(a, h);
        Ok(h)
    }

    for &a in &nts {
        visit(g, a, &mut height, &mut visiting)?;
    }
    Ok(height)
}

/// filter_generating → null_weights → eliminate_nullary → unary_closure →
/// eliminate_unary_cycles → free_weights → left_corner_closure →
/// suffix_products.
pub fn preprocess_pipeline<W: Semiring>(g: &Grammar<W>) -> Result<(Grammar<W>, ClosureTables<W>)> {
    let g1 = g.filter_generating();
    let null = null_weights(&g1)?;
    let g2 = eliminate_nullary(&g1)?;
    let u = unary_closure(&g2)?;
    let g3 = eliminate_unary_cycles_with(&g2, &u)?;
    let free = free_weights(&g3)?;
    let lc = left_corner_closure(&g3, &free)?;
    let sp = suffix_products(&g3, &free);
    Ok((
        g3,
        ClosureTables {
            null_weight: null,
            free_weight: free,
            unary_chain: u.chains,
            left_corner: lc,
            suffix_product: sp,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::semiring::Real;

    fn real(text: &str) -> Grammar<Real> {
        parse_grammar(text).unwrap()
    }

    #[test]
    fn null_weight_closed_form() {
        let g = real("start: A\n0.25 A -> A A\n0.5 A ->\n0.25 A -> a");
        let e = null_weights(&g).unwrap();
        let a = g.symbols.get("A").unwrap();
        // minimal root of 0.25 e^2 - e + 0.5 = 0
        assert!((e[&a].0 - (2.0 - 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn null_weight_simple_cases() {
        let g = real("1.0 S -> a");
        let e = null_weights(&g).unwrap();
        assert!(e[&g.start].is_zero());

        let g = real("start: E\n0.7 E ->");
        let e = null_weights(&g).unwrap();
        assert!((e[&g.start].0 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn free_weight_examples() {
        let g = real("1.0 S -> NP VP\n1.0 NP -> n\n1.0 VP -> v");
        let z = free_weights(&g).unwrap();
        for (_, w) in z {
            assert!((w.0 - 1.0).abs() < 1e-11);
        }
        let g = real("0.5 S -> a");
        assert!((free_weights(&g).unwrap()[&g.start].0 - 0.5).abs() < 1e-12);
        let g = real("0.5 S -> a S\n0.5 S -> a");
        assert!((free_weights(&g).unwrap()[&g.start].0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvergent_fixed_point_reported() {
        let g = real("2.0 S -> S S\n1.0 S ->");
        assert!(matches!(null_weights(&g), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn eliminate_nullary_example() {
        let g = real("start: A\n1.0 A -> a B\n0.5 B ->\n0.5 B -> b");
        let out = eliminate_nullary(&g).unwrap();
        // expect A -> a B@ne (1.0), A -> a (0.5), B@ne -> b (0.5)
        assert_eq!(out.productions().len(), 3);
        assert!(out.productions().iter().all(|p| !p.rhs.is_empty()));
        let a = out.symbols.get("A").unwrap();
        let short: Vec<_> = out
            .productions()
            .iter()
            .filter(|p| p.lhs == a && p.rhs.len() == 1)
            .collect();
        assert_eq!(short.len(), 1);
        assert!((short[0].weight.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eliminate_nullary_no_nullables_is_identity() {
        let g = real("1.0 S -> a S b\n0.5 S -> c");
        let out = eliminate_nullary(&g).unwrap();
        assert_eq!(out.serialize(), g.serialize());
    }

    #[test]
    fn eliminate_nullary_two_nullables_splits_four_ways() {
        let g = real("start: S\n1.0 S -> A a B\n0.5 A ->\n0.5 A -> x\n0.25 B ->\n0.75 B -> y");
        let out = eliminate_nullary(&g).unwrap();
        let s = out.start;
        assert_eq!(out.rules_of(s).len(), 4);
    }

    #[test]
    fn unary_chain_closed_form() {
        let g = real("start: A\n0.5 A -> B\n0.5 B -> A\n0.5 B -> b");
        let u = unary_closure(&g).unwrap();
        let a = g.symbols.get("A").unwrap();
        let b = g.symbols.get("B").unwrap();
        assert!((u.chains[&(a, b)].0 - 2.0 / 3.0).abs() < 1e-12);
        assert!((u.chains[&(a, a)].0 - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unary_self_loop() {
        let g = real("start: A\n0.5 A -> A\n0.5 A -> a");
        let u = unary_closure(&g).unwrap();
        let a = g.symbols.get("A").unwrap();
        assert!((u.chains[&(a, a)].0 - 2.0).abs() < 1e-12);
        assert!(u.in_nontrivial(a));
    }

    #[test]
    fn acyclic_unary_chains_are_reflexive_only() {
        let g = real("start: A1\n1.0 A1 -> A2\n1.0 A2 -> A3\n1.0 A3 -> x");
        let u = unary_closure(&g).unwrap();
        for ((a, b), w) in &u.chains {
            assert_eq!(a, b);
            assert!((w.0 - 1.0).abs() < 1e-12);
        }
        assert!(!u.nontrivial.iter().any(|&x| x));
    }

    #[test]
    fn eliminate_unary_cycles_is_acyclic_and_preserving() {
        let g = real("start: S\n1.0 S -> A\n0.5 A -> B\n0.5 B -> A\n0.5 B -> b");
        let out = eliminate_unary_cycles(&g).unwrap();
        assert!(unary_heights(&out).is_ok());
        // Z("b") = 1/3 via S -> A =>* B -> b
        let z = free_weights(&out).unwrap();
        assert!((z[&out.start].0 - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn eliminate_unary_cycles_identity_when_acyclic() {
        let g = real("1.0 S -> A b\n1.0 A -> a");
        let out = eliminate_unary_cycles(&g).unwrap();
        assert_eq!(out.serialize(), g.serialize());
    }

    #[test]
    fn left_corner_closure_left_recursion() {
        let g = real("0.5 S -> S a\n0.5 S -> a");
        let free = free_weights(&g).unwrap();
        let lc = left_corner_closure(&g, &free).unwrap();
        let s = g.start;
        assert!((lc[&(s, s)].0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn left_corner_closure_two_edge_cycle() {
        let g = real("start: A\n0.5 A -> B c\n1.0 B -> A\n1.0 C -> c"); // C keeps c a terminal
        let free = free_weights(&g).unwrap();
        let lc = left_corner_closure(&g, &free).unwrap();
        let a = g.symbols.get("A").unwrap();
        assert!((lc[&(a, a)].0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn left_corner_closure_crosses_components() {
        let g = real("start: S\n0.5 S -> S a\n0.5 S -> A b\n1.0 A -> x");
        let free = free_weights(&g).unwrap();
        let lc = left_corner_closure(&g, &free).unwrap();
        let s = g.start;
        let a = g.symbols.get("A").unwrap();
        // S =>*_lc A through the S-cycle then the S -> A b edge
        assert!((lc[&(s, a)].0 - 2.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn suffix_products_examples() {
        let g = real("1.0 S -> NP VP\n1.0 NP -> n\n1.0 VP -> v");
        let free = free_weights(&g).unwrap();
        let sp = suffix_products(&g, &free);
        assert!((sp[&(0, 0)].0 - 1.0).abs() < 1e-11);
        assert!((sp[&(0, 2)].0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_clean_grammar_unchanged() {
        let g = real("1.0 S -> NP VP\n0.5 NP -> det n\n0.5 NP -> n\n1.0 VP -> v NP");
        let (out, tables) = preprocess_pipeline(&g).unwrap();
        assert_eq!(out.serialize(), g.serialize());
        assert!(tables.null_weight.values().all(|w| w.is_zero()));
    }

    #[test]
    fn pipeline_cleans_messy_grammar() {
        let g = real(
            "start: S\n0.5 S -> A S\n0.3 S -> b\n0.2 S ->\n0.4 A -> B\n0.4 B -> A\n0.2 A -> a",
        );
        let (out, _) = preprocess_pipeline(&g).unwrap();
        for p in out.productions() {
            assert!(!p.rhs.is_empty() || p.lhs == out.start);
        }
        assert!(unary_heights(&out).is_ok());
    }

    #[test]
    fn extended_left_corners() {
        let g = real("1.0 S -> NP VP\n0.5 NP -> det n\n0.5 NP -> n\n1.0 VP -> v NP");
        let lc = extended_left_corner_terminals(&g);
        let s = g.start;
        let det = g.symbols.get("det").unwrap();
        let n = g.symbols.get("n").unwrap();
        let v = g.symbols.get("v").unwrap();
        assert!(lc[&s].contains(&det) && lc[&s].contains(&n));
        assert!(!lc[&s].contains(&v));
    }
}
