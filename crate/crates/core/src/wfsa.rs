//! The single-automaton grammar representation: a weighted FSA whose
//! accepted strings have the form `rhs Â`, each string standing for one
//! production `A -> rhs` with the total path weight as rule weight. Provides
//! the CFG encoding, epsilon-cycle elimination, automaton-level nullary and
//! unary-cycle elimination, a boolean-projection determinize/minimize pass,
//! and the precomputed side tables the FSA engine consumes.

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Sym, SymbolTable};
use crate::graph::{kleene_closure, sccs};
use crate::semiring::Semiring;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Eps,
    Plain(Sym),
    Hat(Sym),
}

#[derive(Clone, Debug)]
pub struct Arc<W> {
    pub src: u32,
    pub dst: u32,
    pub label: Label,
    pub weight: W,
}

#[derive(Clone, Debug)]
pub struct Wfsa<W> {
    pub symbols: SymbolTable,
    pub n_states: usize,
    pub arcs: Vec<Arc<W>>,
    pub initial: BTreeMap<u32, W>,
    pub finals: BTreeMap<u32, W>,
    /// goal nonterminal for recognition
    pub start: Sym,
}

impl<W: Semiring> Wfsa<W> {
    /// Symbols that occur hatted (plus the start symbol): the nonterminals.
    pub fn nonterminals(&self) -> HashSet<Sym> {
        let mut set: HashSet<Sym> = self
            .arcs
            .iter()
            .filter_map(|a| match a.label {
                Label::Hat(s) => Some(s),
                _ => None,
            })
            .collect();
        set.insert(self.start);
        set
    }

    pub fn out_index(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.n_states];
        for (i, a) in self.arcs.iter().enumerate() {
            idx[a.src as usize].push(i);
        }
        idx
    }

    fn label_text(&self, l: Label) -> String {
        match l {
            Label::Eps => "<eps>".into(),
            Label::Plain(s) => self.symbols.name(s).into(),
            Label::Hat(s) => format!("^{}", self.symbols.name(s)),
        }
    }

    /// Merge duplicate arcs and drop zero-weight arcs and weights.
    pub fn normalize(&mut self) {
        let mut merged: BTreeMap<(u32, u32, Label), W> = BTreeMap::new();
        for a in self.arcs.drain(..) {
            let slot = merged.entry((a.src, a.dst, a.label)).or_insert_with(W::zero);
            *slot = slot.plus(&a.weight);
        }
        self.arcs = merged
            .into_iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|((src, dst, label), weight)| Arc { src, dst, label, weight })
            .collect();
        self.initial.retain(|_, w| !w.is_zero());
        self.finals.retain(|_, w| !w.is_zero());
    }

    /// Drop states not on an initial-to-final path and renumber the rest in
    /// traversal order (canonical integers for deterministic serialization).
    pub fn prune(&mut self) {
        self.normalize();
        let out = self.out_index();
        let mut fwd = vec![false; self.n_states];
        let mut queue: VecDeque<u32> = self.initial.keys().copied().collect();
        for &q in self.initial.keys() {
            fwd[q as usize] = true;
        }
        while let Some(q) = queue.pop_front() {
            for &ai in &out[q as usize] {
                let d = self.arcs[ai].dst;
                if !fwd[d as usize] {
                    fwd[d as usize] = true;
                    queue.push_back(d);
                }
            }
        }
        let mut rev_adj = vec![Vec::new(); self.n_states];
        for a in &self.arcs {
            rev_adj[a.dst as usize].push(a.src);
        }
        let mut bwd = vec![false; self.n_states];
        let mut queue: VecDeque<u32> = self.finals.keys().copied().collect();
        for &q in self.finals.keys() {
            bwd[q as usize] = true;
        }
        while let Some(q) = queue.pop_front() {
            for &s in &rev_adj[q as usize] {
                if !bwd[s as usize] {
                    bwd[s as usize] = true;
                    queue.push_back(s);
                }
            }
        }
        let keep: Vec<bool> = (0..self.n_states).map(|q| fwd[q] && bwd[q]).collect();

        // renumber by BFS from the initial states over label-sorted arcs
        let mut order: HashMap<u32, u32> = HashMap::new();
        let mut queue: VecDeque<u32> = VecDeque::new();
        for &q in self.initial.keys() {
            if keep[q as usize] && !order.contains_key(&q) {
                order.insert(q, order.len() as u32);
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            let mut outs: Vec<&Arc<W>> = out[q as usize]
                .iter()
                .map(|&ai| &self.arcs[ai])
                .filter(|a| keep[a.dst as usize])
                .collect();
            outs.sort_by_key(|a| (self.label_text(a.label), a.dst));
            for a in outs {
                if !order.contains_key(&a.dst) {
                    order.insert(a.dst, order.len() as u32);
                    queue.push_back(a.dst);
                }
            }
        }
        self.arcs.retain(|a| order.contains_key(&a.src) && order.contains_key(&a.dst));
        for a in &mut self.arcs {
            a.src = order[&a.src];
            a.dst = order[&a.dst];
        }
        self.initial = self
            .initial
            .iter()
            .filter_map(|(q, w)| order.get(q).map(|&n| (n, w.clone())))
            .collect();
        self.finals = self
            .finals
            .iter()
            .filter_map(|(q, w)| order.get(q).map(|&n| (n, w.clone())))
            .collect();
        self.n_states = order.len();
        self.normalize();
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("start {}\n", self.symbols.name(self.start)));
        for (q, w) in &self.initial {
            out.push_str(&format!("initial {} {}\n", q, w.display_weight()));
        }
        for (q, w) in &self.finals {
            out.push_str(&format!("final {} {}\n", q, w.display_weight()));
        }
        let mut lines: Vec<(u32, String, u32, String)> = self
            .arcs
            .iter()
            .map(|a| (a.src, self.label_text(a.label), a.dst, a.weight.display_weight()))
            .collect();
        lines.sort();
        for (src, label, dst, w) in lines {
            out.push_str(&format!("{} {} {} {}\n", src, dst, label, w));
        }
        out
    }
}

pub fn parse_wfsa<W: Semiring>(text: &str) -> Result<Wfsa<W>> {
    let mut symbols = SymbolTable::new();
    let mut arcs = Vec::new();
    let mut initial = BTreeMap::new();
    let mut finals = BTreeMap::new();
    let mut start = None;
    let mut max_state = 0u32;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let syntax = |reason: &str| Error::Syntax { line: lineno, reason: reason.into() };
        let state = |t: &str| -> Result<u32> {
            t.parse().map_err(|_| syntax(&format!("bad state id {t:?}")))
        };
        let weight = |t: &str| -> Result<W> {
            W::parse_weight(t).map_err(|reason| Error::BadWeight { line: lineno, reason })
        };
        match toks[0] {
            "start" => {
                if toks.len() != 2 {
                    return Err(syntax("expected: start <symbol>"));
                }
                start = Some(symbols.intern(toks[1]));
            }
            "initial" | "final" => {
                if toks.len() != 3 {
                    return Err(syntax("expected: initial|final <state> <weight>"));
                }
                let q = state(toks[1])?;
                let w = weight(toks[2])?;
                max_state = max_state.max(q);
                if !w.is_zero() {
                    let map = if toks[0] == "initial" { &mut initial } else { &mut finals };
                    let slot: &mut W = map.entry(q).or_insert_with(W::zero);
                    *slot = slot.plus(&w);
                }
            }
            _ => {
                if toks.len() != 4 {
                    return Err(syntax("expected: <src> <dst> <label> <weight>"));
                }
                let src = state(toks[0])?;
                let dst = state(toks[1])?;
                let label = match toks[2] {
                    "<eps>" => Label::Eps,
                    t if t.starts_with('^') => Label::Hat(symbols.intern(&t[1..])),
                    t => Label::Plain(symbols.intern(t)),
                };
                let w = weight(toks[3])?;
                max_state = max_state.max(src).max(dst);
                if !w.is_zero() {
                    arcs.push(Arc { src, dst, label, weight: w });
                }
            }
        }
    }
    let start = start.ok_or(Error::NoStart)?;
    let mut m = Wfsa {
        symbols,
        n_states: max_state as usize + 1,
        arcs,
        initial,
        finals,
        start,
    };
    m.normalize();
    Ok(m)
}

/// One accepting path `rhs Â` per production, rule weight on the first arc,
/// single initial state, single final state; arc count equals grammar size.
pub fn encode_cfg_as_wfsa<W: Semiring>(g: &Grammar<W>) -> Wfsa<W> {
    let mut arcs = Vec::new();
    let mut n_states = 2u32; // 0 = initial, 1 = final
    for p in g.productions() {
        let mut cur = 0u32;
        for (k, &s) in p.rhs.iter().enumerate() {
            let w = if k == 0 { p.weight.clone() } else { W::one() };
            let nxt = n_states;
            n_states += 1;
            arcs.push(Arc { src: cur, dst: nxt, label: Label::Plain(s), weight: w });
            cur = nxt;
        }
        let w = if p.rhs.is_empty() { p.weight.clone() } else { W::one() };
        arcs.push(Arc { src: cur, dst: 1, label: Label::Hat(p.lhs), weight: w });
    }
    Wfsa {
        symbols: g.symbols.clone(),
        n_states: n_states as usize,
        arcs,
        initial: BTreeMap::from([(0, W::one())]),
        finals: BTreeMap::from([(1, W::one())]),
        start: g.start,
    }
}

/// All-pairs epsilon-path closure, including the empty path.
fn eps_closure<W: Semiring>(m: &Wfsa<W>) -> Result<Vec<Vec<W>>> {
    let n = m.n_states;
    let mut mat = vec![vec![W::zero(); n]; n];
    let mut any = false;
    for a in &m.arcs {
        if a.label == Label::Eps {
            let slot = &mut mat[a.src as usize][a.dst as usize];
            *slot = slot.plus(&a.weight);
            any = true;
        }
    }
    if !any {
        // identity; skips the cubic closure on epsilon-free automata
        for (q, row) in mat.iter_mut().enumerate() {
            row[q] = W::one();
        }
        return Ok(mat);
    }
    kleene_closure(mat)
}

/// Equivalent automaton whose epsilon graph is acyclic: per-SCC closure
/// redistributed onto every non-internal outgoing arc and final weight.
pub fn eliminate_epsilon_cycles<W: Semiring>(m: &Wfsa<W>) -> Result<Wfsa<W>> {
    let n = m.n_states;
    let eps_edges: Vec<(usize, usize)> = m
        .arcs
        .iter()
        .filter(|a| a.label == Label::Eps)
        .map(|a| (a.src as usize, a.dst as usize))
        .collect();
    let has_self: HashSet<usize> =
        eps_edges.iter().filter(|(s, d)| s == d).map(|&(s, _)| s).collect();
    let comps = sccs(n, &eps_edges);
    let mut scc_of: Vec<Option<usize>> = vec![None; n];
    let mut closures: Vec<HashMap<(usize, usize), W>> = Vec::new();
    for comp in &comps {
        if comp.len() < 2 && !has_self.contains(&comp[0]) {
            continue;
        }
        let k = comp.len();
        let pos: HashMap<usize, usize> = comp.iter().copied().zip(0..).collect();
        let mut mat = vec![vec![W::zero(); k]; k];
        for a in &m.arcs {
            if a.label == Label::Eps {
                if let (Some(&i), Some(&j)) =
                    (pos.get(&(a.src as usize)), pos.get(&(a.dst as usize)))
                {
                    mat[i][j] = mat[i][j].plus(&a.weight);
                }
            }
        }
        let closed = kleene_closure(mat)?;
        let cid = closures.len();
        let mut table = HashMap::new();
        for (i, &p) in comp.iter().enumerate() {
            scc_of[p] = Some(cid);
            for (j, &q) in comp.iter().enumerate() {
                if !closed[i][j].is_zero() {
                    table.insert((p, q), closed[i][j].clone());
                }
            }
        }
        closures.push(table);
    }
    if closures.is_empty() {
        return Ok(m.clone());
    }

    let members: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); closures.len()];
        for (q, c) in scc_of.iter().enumerate() {
            if let Some(cid) = c {
                v[*cid].push(q);
            }
        }
        v
    };
    let mut out = m.clone();
    out.arcs.clear();
    for a in &m.arcs {
        let src = a.src as usize;
        match scc_of[src] {
            Some(cid) => {
                let internal = a.label == Label::Eps && scc_of[a.dst as usize] == Some(cid);
                if internal {
                    continue;
                }
                for &p in &members[cid] {
                    if let Some(c) = closures[cid].get(&(p, src)) {
                        out.arcs.push(Arc {
                            src: p as u32,
                            dst: a.dst,
                            label: a.label,
                            weight: c.times(&a.weight),
                        });
                    }
                }
            }
            None => out.arcs.push(a.clone()),
        }
    }
    let mut finals = BTreeMap::new();
    for q in 0..n {
        let w = match scc_of[q] {
            Some(cid) => {
                let mut w = W::zero();
                for &t in &members[cid] {
                    if let (Some(c), Some(f)) =
                        (closures[cid].get(&(q, t)), m.finals.get(&(t as u32)))
                    {
                        w = w.plus(&c.times(f));
                    }
                }
                w
            }
            None => m.finals.get(&(q as u32)).cloned().unwrap_or_else(W::zero),
        };
        if !w.is_zero() {
            finals.insert(q as u32, w);
        }
    }
    out.finals = finals;
    out.normalize();
    Ok(out)
}

/// Minimal DFA for the boolean projection of the label-string language.
pub fn determinize_minimize_boolean<W: Semiring>(m: &Wfsa<W>, forget: bool) -> Result<Wfsa<W>> {
    if m.arcs.iter().any(|a| a.label == Label::Eps) {
        return Err(Error::EpsilonArcs(
            "determinization requires an epsilon-free automaton".into(),
        ));
    }
    if !forget {
        let trivial = |w: &W| w.approx_eq(&W::one(), 0.0, 0.0);
        let ok = m.arcs.iter().all(|a| trivial(&a.weight))
            && m.initial.values().all(trivial)
            && m.finals.values().all(trivial);
        if !ok {
            return Err(Error::WeightedInput(
                "non-trivial weights; pass the forget flag to project to boolean".into(),
            ));
        }
    }

    // subset construction
    let out = m.out_index();
    let mut subsets: Vec<Vec<u32>> = Vec::new();
    let mut ids: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut dtrans: Vec<BTreeMap<Label, usize>> = Vec::new();
    let mut accept: Vec<bool> = Vec::new();
    let start_set: Vec<u32> = m.initial.keys().copied().collect();
    ids.insert(start_set.clone(), 0);
    subsets.push(start_set);
    let mut queue = VecDeque::from([0usize]);
    while let Some(sid) = queue.pop_front() {
        let subset = subsets[sid].clone();
        accept.push(subset.iter().any(|q| m.finals.contains_key(q)));
        debug_assert_eq!(accept.len(), sid + 1);
        let mut moves: BTreeMap<Label, Vec<u32>> = BTreeMap::new();
        for &q in &subset {
            for &ai in &out[q as usize] {
                let a = &m.arcs[ai];
                moves.entry(a.label).or_default().push(a.dst);
            }
        }
        let mut trans = BTreeMap::new();
        for (label, mut dsts) in moves {
            dsts.sort_unstable();
            dsts.dedup();
            let tid = *ids.entry(dsts.clone()).or_insert_with(|| {
                subsets.push(dsts);
                queue.push_back(subsets.len() - 1);
                subsets.len() - 1
            });
            trans.insert(label, tid);
        }
        dtrans.push(trans);
    }

    // Moore refinement with an implicit dead class for missing transitions
    let n = subsets.len();
    let mut class: Vec<usize> = accept.iter().map(|&a| usize::from(a)).collect();
    loop {
        let mut sig_ids: HashMap<(usize, Vec<(Label, Option<usize>)>), usize> = HashMap::new();
        let mut next: Vec<usize> = Vec::with_capacity(n);
        let labels: Vec<Label> = {
            let mut v: Vec<Label> = dtrans.iter().flat_map(|t| t.keys().copied()).collect();
            v.sort();
            v.dedup();
            v
        };
        for s in 0..n {
            let sig: Vec<(Label, Option<usize>)> = labels
                .iter()
                .map(|&l| (l, dtrans[s].get(&l).map(|&t| class[t])))
                .collect();
            let nid = sig_ids.len();
            let id = *sig_ids.entry((class[s], sig)).or_insert(nid);
            next.push(id);
        }
        if next == class {
            break;
        }
        class = next;
    }

    let n_classes = class.iter().max().map_or(0, |&c| c + 1);
    let mut rep = vec![usize::MAX; n_classes];
    for s in 0..n {
        rep[class[s]] = rep[class[s]].min(s);
    }
    let mut out_m = Wfsa {
        symbols: m.symbols.clone(),
        n_states: n_classes,
        arcs: Vec::new(),
        initial: BTreeMap::from([(class[0] as u32, W::one())]),
        finals: (0..n_classes)
            .filter(|&c| accept[rep[c]])
            .map(|c| (c as u32, W::one()))
            .collect(),
        start: m.start,
    };
    for c in 0..n_classes {
        for (&label, &t) in &dtrans[rep[c]] {
            out_m.arcs.push(Arc {
                src: c as u32,
                dst: class[t] as u32,
                label,
                weight: W::one(),
            });
        }
    }
    out_m.prune();
    Ok(out_m)
}

/// Automaton-level nullary elimination. Every arc over a nullable
/// nonterminal B is split into a renamed non-empty arc `B@ne` and a parallel
/// epsilon arc carrying the null weight; lone-hat strings (the nullary rules
/// themselves) are filtered out by a has-read-a-label product; a fresh start
/// component carries the start symbol's null weight when it is nullable.
pub fn wfsa_eliminate_nullary<W: Semiring>(
    m: &Wfsa<W>,
    null: &HashMap<Sym, W>,
) -> Result<Wfsa<W>> {
    let nts = m.nonterminals();
    let mut symbols = m.symbols.clone();
    let mut rename: HashMap<Sym, Sym> = HashMap::new();
    let mut nullable: Vec<Sym> = nts
        .iter()
        .copied()
        .filter(|b| null.get(b).is_some_and(|w| !w.is_zero()))
        .collect();
    nullable.sort();
    for &b in &nullable {
        let ne = symbols.fresh(&format!("{}@ne", symbols.name(b).to_owned()));
        rename.insert(b, ne);
    }

    // split and rename, then run the two-track "has read a non-hat label"
    // product; states (q, flag) with flag * n offset
    let n = m.n_states as u32;
    let mut arcs: Vec<Arc<W>> = Vec::new();
    let mut push_tracked = |src: u32, dst: u32, label: Label, weight: W| {
        // flag 0 -> 0/1, flag 1 -> 1; Plain sets the flag, Eps and Hat keep it
        let bump = matches!(label, Label::Plain(_));
        for flag in 0..2u32 {
            let nf = if bump { 1 } else { flag };
            arcs.push(Arc {
                src: src + flag * n,
                dst: dst + nf * n,
                label,
                weight: weight.clone(),
            });
        }
    };
    for a in &m.arcs {
        match a.label {
            Label::Plain(b) if rename.contains_key(&b) => {
                push_tracked(a.src, a.dst, Label::Plain(rename[&b]), a.weight.clone());
                let eps_w = a.weight.times(&null[&b]);
                push_tracked(a.src, a.dst, Label::Eps, eps_w);
            }
            Label::Hat(b) if rename.contains_key(&b) => {
                push_tracked(a.src, a.dst, Label::Hat(rename[&b]), a.weight.clone());
            }
            _ => push_tracked(a.src, a.dst, a.label, a.weight.clone()),
        }
    }
    let initial: BTreeMap<u32, W> = m.initial.clone(); // flag 0 copies
    let mut finals: BTreeMap<u32, W> = m
        .finals
        .iter()
        .map(|(&q, w)| (q + n, w.clone())) // only flag 1 accepts
        .collect();

    let mut out = Wfsa {
        symbols,
        n_states: 2 * m.n_states,
        arcs,
        initial,
        finals: std::mem::take(&mut finals),
        start: m.start,
    };

    // start handling: S@s -> S@ne (weight 1) and S@s -> epsilon (weight e_S)
    if let Some(&s_ne) = rename.get(&m.start) {
        let s_new = out.symbols.fresh(&format!("{}@s", out.symbols.name(m.start).to_owned()));
        let e_s = null[&m.start].clone();
        let a = out.n_states as u32;
        let b = a + 1;
        let f = a + 2;
        out.n_states += 3;
        out.arcs.push(Arc { src: a, dst: b, label: Label::Plain(s_ne), weight: W::one() });
        out.arcs.push(Arc { src: b, dst: f, label: Label::Hat(s_new), weight: W::one() });
        out.arcs.push(Arc { src: a, dst: f, label: Label::Hat(s_new), weight: e_s });
        out.initial.insert(a, W::one());
        out.finals.insert(f, W::one());
        out.start = s_new;
    }
    out.prune();
    Ok(out)
}

/// Unary-chain structure extracted from an automaton: the total weight of
/// each rule-shaped string `B Â`, its SCC decomposition, and the per-SCC
/// Kleene closures.
#[derive(Clone, Debug)]
pub struct WfsaUnaryChains<W> {
    pub scc_of: HashMap<Sym, usize>,
    pub members: Vec<Vec<Sym>>,
    pub nontrivial: HashSet<usize>,
    /// (A, B) -> total weight of A =>* B within A's SCC (reflexive closure)
    pub chain: HashMap<(Sym, Sym), W>,
    /// raw rule weights: (A, B) -> total weight of strings `B Â`
    pub unary: HashMap<(Sym, Sym), W>,
}

impl<W> WfsaUnaryChains<W> {
    pub fn in_nontrivial(&self, a: Sym) -> bool {
        self.scc_of.get(&a).is_some_and(|c| self.nontrivial.contains(c))
    }

    pub fn same_nontrivial_scc(&self, a: Sym, b: Sym) -> bool {
        match (self.scc_of.get(&a), self.scc_of.get(&b)) {
            (Some(x), Some(y)) => x == y && self.nontrivial.contains(x),
            _ => false,
        }
    }
}

pub fn extract_unary_chains<W: Semiring>(m: &Wfsa<W>) -> Result<WfsaUnaryChains<W>> {
    let nts = m.nonterminals();
    let closure = eps_closure(m)?;
    let n = m.n_states;
    let mut from_init = vec![W::zero(); n];
    for (&q, w) in &m.initial {
        for p in 0..n {
            from_init[p] = from_init[p].plus(&w.times(&closure[q as usize][p]));
        }
    }
    let mut to_final = vec![W::zero(); n];
    for (&q, w) in &m.finals {
        for p in 0..n {
            to_final[p] = to_final[p].plus(&closure[p][q as usize].times(w));
        }
    }
    // total weight of every length-2 accepted string "B Â"
    let mut unary: HashMap<(Sym, Sym), W> = HashMap::new();
    for a1 in &m.arcs {
        let Label::Plain(b) = a1.label else { continue };
        if !nts.contains(&b) {
            continue;
        }
        for a2 in &m.arcs {
            let Label::Hat(lhs) = a2.label else { continue };
            let w = from_init[a1.src as usize]
                .times(&a1.weight)
                .times(&closure[a1.dst as usize][a2.src as usize])
                .times(&a2.weight)
                .times(&to_final[a2.dst as usize]);
            if !w.is_zero() {
                let slot = unary.entry((lhs, b)).or_insert_with(W::zero);
                *slot = slot.plus(&w);
            }
        }
    }

    let mut syms: Vec<Sym> = nts.iter().copied().collect();
    syms.sort();
    let pos: HashMap<Sym, usize> = syms.iter().copied().zip(0..).collect();
    let edges: Vec<(usize, usize)> =
        unary.keys().map(|&(a, b)| (pos[&a], pos[&b])).collect();
    let comps = sccs(syms.len(), &edges);
    let mut scc_of = HashMap::new();
    let mut members = Vec::new();
    let mut nontrivial = HashSet::new();
    let mut chain = HashMap::new();
    for comp in comps {
        let cid = members.len();
        let mut comp_syms: Vec<Sym> = comp.iter().map(|&i| syms[i]).collect();
        comp_syms.sort();
        for &s in &comp_syms {
            scc_of.insert(s, cid);
        }
        let is_nt = comp_syms.len() > 1
            || unary.get(&(comp_syms[0], comp_syms[0])).is_some_and(|w| !w.is_zero());
        if is_nt {
            nontrivial.insert(cid);
            let k = comp_syms.len();
            let mut mat = vec![vec![W::zero(); k]; k];
            for (i, &a) in comp_syms.iter().enumerate() {
                for (j, &b) in comp_syms.iter().enumerate() {
                    if let Some(w) = unary.get(&(a, b)) {
                        mat[i][j] = w.clone();
                    }
                }
            }
            let closed = kleene_closure(mat)?;
            for (i, &a) in comp_syms.iter().enumerate() {
                for (j, &b) in comp_syms.iter().enumerate() {
                    if !closed[i][j].is_zero() {
                        chain.insert((a, b), closed[i][j].clone());
                    }
                }
            }
        }
        members.push(comp_syms);
    }
    Ok(WfsaUnaryChains { scc_of, members, nontrivial, chain, unary })
}

/// Automaton-level unary-cycle elimination: strings `B Â` with A, B in the
/// same nontrivial SCC are removed; every remaining hat arc over a cyclic
/// nonterminal B is fanned out to Â for each SCC member A, scaled by the
/// chain weight w(A =>* B). Cross-SCC unary rules are preserved, so the
/// result follows the condensation order and has no unary cycles.
pub fn wfsa_eliminate_unary<W: Semiring>(
    m: &Wfsa<W>,
    chains: &WfsaUnaryChains<W>,
) -> Result<Wfsa<W>> {
    let nts = m.nonterminals();
    // product statuses over the label string read so far
    #[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
    enum St {
        Start,
        OneNt(Sym),
        Other,
        Done,
    }
    let out = m.out_index();
    let mut ids: HashMap<(u32, St), u32> = HashMap::new();
    let mut states: Vec<(u32, St)> = Vec::new();
    let mut intern = |states: &mut Vec<(u32, St)>, key: (u32, St)| -> u32 {
        *ids.entry(key).or_insert_with(|| {
            states.push(key);
            (states.len() - 1) as u32
        })
    };
    let mut new = Wfsa {
        symbols: m.symbols.clone(),
        n_states: 0,
        arcs: Vec::new(),
        initial: BTreeMap::new(),
        finals: BTreeMap::new(),
        start: m.start,
    };
    let mut queue: VecDeque<u32> = VecDeque::new();
    for (&q, w) in &m.initial {
        let id = intern(&mut states, (q, St::Start));
        new.initial.insert(id, w.clone());
        queue.push_back(id);
    }
    let mut seen: HashSet<u32> = queue.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        let (q, st) = states[id as usize];
        if let Some(w) = m.finals.get(&q) {
            new.finals.insert(id, w.clone());
        }
        for &ai in &out[q as usize] {
            let a = &m.arcs[ai];
            let mut push = |states: &mut Vec<(u32, St)>,
                            queue: &mut VecDeque<u32>,
                            seen: &mut HashSet<u32>,
                            arcs: &mut Vec<Arc<W>>,
                            label: Label,
                            st2: St,
                            w: W| {
                let did = intern(states, (a.dst, st2));
                arcs.push(Arc { src: id, dst: did, label, weight: w });
                if seen.insert(did) {
                    queue.push_back(did);
                }
            };
            match a.label {
                Label::Eps => {
                    push(&mut states, &mut queue, &mut seen, &mut new.arcs, Label::Eps, st, a.weight.clone());
                }
                Label::Plain(t) => {
                    let st2 = match st {
                        St::Start if nts.contains(&t) => St::OneNt(t),
                        _ => St::Other,
                    };
                    push(&mut states, &mut queue, &mut seen, &mut new.arcs, a.label, st2, a.weight.clone());
                }
                Label::Hat(b) => {
                    if chains.in_nontrivial(b) {
                        if let St::OneNt(c) = st {
                            if chains.same_nontrivial_scc(c, b) {
                                continue; // collapsed unary rule
                            }
                        }
                        let cid = chains.scc_of[&b];
                        for &lhs in chains.members[cid].clone().iter() {
                            if let Some(cw) = chains.chain.get(&(lhs, b)) {
                                let w = cw.times(&a.weight);
                                push(&mut states, &mut queue, &mut seen, &mut new.arcs, Label::Hat(lhs), St::Done, w);
                            }
                        }
                    } else {
                        push(&mut states, &mut queue, &mut seen, &mut new.arcs, a.label, St::Done, a.weight.clone());
                    }
                }
            }
        }
    }
    new.n_states = states.len();
    new.prune();
    Ok(new)
}

/// Side-condition relations the FSA engine consumes.
#[derive(Clone, Debug)]
pub struct SideTables<W> {
    /// (q, A): q has an out-arc labeled with nonterminal A
    pub can_advance: HashSet<(u32, Sym)>,
    /// (q, A): some path from q eventually reads Â
    pub can_end_in: HashSet<(u32, Sym)>,
    /// generalized finality: total weight of epsilon-only paths to a final
    pub final_closure: HashMap<u32, W>,
    /// (q, A) -> sum over arcs q -Â(w)-> q' of w times final_closure(q')
    pub hat_final: HashMap<(u32, Sym), W>,
}

pub fn build_side_tables<W: Semiring>(m: &Wfsa<W>) -> Result<SideTables<W>> {
    let nts = m.nonterminals();
    let closure = eps_closure(m)?;
    let n = m.n_states;
    let mut final_closure = HashMap::new();
    for q in 0..n {
        let mut w = W::zero();
        for (&f, fw) in &m.finals {
            w = w.plus(&closure[q][f as usize].times(fw));
        }
        if !w.is_zero() {
            final_closure.insert(q as u32, w);
        }
    }
    let mut can_advance = HashSet::new();
    let mut hat_sources: HashMap<Sym, Vec<u32>> = HashMap::new();
    let mut hat_final: HashMap<(u32, Sym), W> = HashMap::new();
    for a in &m.arcs {
        match a.label {
            Label::Plain(s) if nts.contains(&s) => {
                can_advance.insert((a.src, s));
            }
            Label::Hat(s) => {
                hat_sources.entry(s).or_default().push(a.src);
                if let Some(fc) = final_closure.get(&a.dst) {
                    let w = a.weight.times(fc);
                    let slot = hat_final.entry((a.src, s)).or_insert_with(W::zero);
                    *slot = slot.plus(&w);
                }
            }
            _ => {}
        }
    }
    let mut rev = vec![Vec::new(); n];
    for a in &m.arcs {
        rev[a.dst as usize].push(a.src);
    }
    let mut can_end_in = HashSet::new();
    for (sym, sources) in hat_sources {
        let mut mark = vec![false; n];
        let mut queue: VecDeque<u32> = VecDeque::new();
        for &s in &sources {
            if !mark[s as usize] {
                mark[s as usize] = true;
                queue.push_back(s);
            }
        }
        while let Some(q) = queue.pop_front() {
            can_end_in.insert((q, sym));
            for &p in &rev[q as usize] {
                if !mark[p as usize] {
                    mark[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
    }
    Ok(SideTables { can_advance, can_end_in, final_closure, hat_final })
}

/// Exhaustively enumerates accepted label strings up to `max_len` labels
/// with their total path weights (epsilon handled via closure). Test helper.
pub fn enumerate_label_strings<W: Semiring>(
    m: &Wfsa<W>,
    max_len: usize,
) -> Result<Vec<(Vec<String>, W)>> {
    let n = m.n_states;
    let closure = eps_closure(m)?;
    let mut labels: Vec<Label> = m
        .arcs
        .iter()
        .map(|a| a.label)
        .filter(|l| *l != Label::Eps)
        .collect();
    labels.sort_by_key(|&l| m.label_text(l));
    labels.dedup();
    let mut label_mat: HashMap<Label, Vec<Vec<W>>> = HashMap::new();
    for &l in &labels {
        let mut mat = vec![vec![W::zero(); n]; n];
        for a in &m.arcs {
            if a.label == l {
                let slot = &mut mat[a.src as usize][a.dst as usize];
                *slot = slot.plus(&a.weight);
            }
        }
        label_mat.insert(l, mat);
    }
    let mut v0 = vec![W::zero(); n];
    for (&q, w) in &m.initial {
        for p in 0..n {
            v0[p] = v0[p].plus(&w.times(&closure[q as usize][p]));
        }
    }
    let mut results = Vec::new();
    let mut stack: Vec<String> = Vec::new();
    fn go<W: Semiring>(
        m: &Wfsa<W>,
        labels: &[Label],
        label_mat: &HashMap<Label, Vec<Vec<W>>>,
        closure: &[Vec<W>],
        v: &[W],
        stack: &mut Vec<String>,
        left: usize,
        results: &mut Vec<(Vec<String>, W)>,
    ) {
        let n = v.len();
        let mut acc = W::zero();
        for (&f, fw) in &m.finals {
            acc = acc.plus(&v[f as usize].times(fw));
        }
        if !acc.is_zero() && !stack.is_empty() {
            results.push((stack.clone(), acc));
        }
        if left == 0 {
            return;
        }
        for &l in labels {
            let mat = &label_mat[&l];
            let mut v2 = vec![W::zero(); n];
            let mut any = false;
            for p in 0..n {
                if v[p].is_zero() {
                    continue;
                }
                for q in 0..n {
                    if mat[p][q].is_zero() {
                        continue;
                    }
                    let step = v[p].times(&mat[p][q]);
                    for r in 0..n {
                        let w = step.times(&closure[q][r]);
                        if !w.is_zero() {
                            v2[r] = v2[r].plus(&w);
                            any = true;
                        }
                    }
                }
            }
            if any {
                stack.push(m.label_text(l));
                go(m, labels, label_mat, closure, &v2, stack, left - 1, results);
                stack.pop();
            }
        }
    }
    go(m, &labels, &label_mat, &closure, &v0, &mut stack, max_len, &mut results);
    results.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::semiring::{Boolean, Real};
    use crate::transform::null_weights;

    const G1: &str = "1.0 S -> NP VP\n0.5 NP -> det n\n0.5 NP -> n\n1.0 VP -> v NP";

    fn real(text: &str) -> Grammar<Real> {
        parse_grammar(text).unwrap()
    }

    fn weight_of(strings: &[(Vec<String>, Real)], s: &[&str]) -> f64 {
        strings
            .iter()
            .find(|(labels, _)| labels.iter().map(String::as_str).eq(s.iter().copied()))
            .map(|(_, w)| w.0)
            .unwrap_or(0.0)
    }

    #[test]
    fn encode_arc_count_equals_grammar_size() {
        let g = real(G1);
        let m = encode_cfg_as_wfsa(&g);
        assert_eq!(m.arcs.len(), g.size_report().total_size);
        let strings = enumerate_label_strings(&m, 3).unwrap();
        assert_eq!(strings.len(), 4);
        assert!((weight_of(&strings, &["NP", "VP", "^S"]) - 1.0).abs() < 1e-12);
        assert!((weight_of(&strings, &["det", "n", "^NP"]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn encode_nullary_production_is_single_arc() {
        let g = real("start: A\n0.5 A ->\n0.5 A -> a");
        let m = encode_cfg_as_wfsa(&g);
        let strings = enumerate_label_strings(&m, 2).unwrap();
        assert!((weight_of(&strings, &["^A"]) - 0.5).abs() < 1e-12);
        assert_eq!(m.arcs.len(), 3);
    }

    #[test]
    fn fsa_roundtrip() {
        let g = real(G1);
        let mut m = encode_cfg_as_wfsa(&g);
        m.prune();
        let text = m.serialize();
        let m2: Wfsa<Real> = parse_wfsa(&text).unwrap();
        assert_eq!(m2.serialize(), text);
        let a = enumerate_label_strings(&m, 3).unwrap();
        let b = enumerate_label_strings(&m2, 3).unwrap();
        assert_eq!(a.len(), b.len());
        for ((s1, w1), (s2, w2)) in a.iter().zip(&b) {
            assert_eq!(s1, s2);
            assert!((w1.0 - w2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fsa_parse_errors() {
        assert!(matches!(parse_wfsa::<Real>("0 1 a 1.0"), Err(Error::NoStart)));
        assert!(parse_wfsa::<Real>("start S\n0 1 a").is_err());
        assert!(matches!(
            parse_wfsa::<Real>("start S\n0 1 a -3.0"),
            Err(Error::BadWeight { .. })
        ));
    }

    #[test]
    fn determinize_shares_prefixes() {
        let g: Grammar<Boolean> =
            parse_grammar("start: NP\n1 NP -> det n\n1 NP -> det adj n").unwrap();
        let m = encode_cfg_as_wfsa(&g);
        let d = determinize_minimize_boolean(&m, false).unwrap();
        assert!(d.n_states < m.n_states);
        // deterministic: no duplicate (src, label)
        let mut seen = HashSet::new();
        for a in &d.arcs {
            assert!(seen.insert((a.src, a.label)));
        }
        // same language
        let before: Vec<Vec<String>> = enumerate_label_strings(&m, 5)
            .unwrap()
            .into_iter()
            .map(|(s, _)| s)
            .collect();
        let after: Vec<Vec<String>> = enumerate_label_strings(&d, 5)
            .unwrap()
            .into_iter()
            .map(|(s, _)| s)
            .collect();
        assert_eq!(before, after);
        // idempotent on an already minimal DFA
        let d2 = determinize_minimize_boolean(&d, false).unwrap();
        assert_eq!(d2.n_states, d.n_states);
    }

    #[test]
    fn determinize_suffix_sharing_merges_tails() {
        // mu nu ^A and mu nu' ^B share the mu prefix after determinization
        let g: Grammar<Boolean> =
            parse_grammar("start: S\n1 S -> det n sg\n1 T -> det n pl\n1 S -> T x").unwrap();
        let m = encode_cfg_as_wfsa(&g);
        let d = determinize_minimize_boolean(&m, false).unwrap();
        assert!(d.n_states < m.n_states);
    }

    #[test]
    fn determinize_rejects_weighted_and_epsilon() {
        let g = real(G1);
        let m = encode_cfg_as_wfsa(&g);
        assert!(matches!(
            determinize_minimize_boolean(&m, false),
            Err(Error::WeightedInput(_))
        ));
        assert!(determinize_minimize_boolean(&m, true).is_ok());
        let mut m2 = m.clone();
        m2.arcs.push(Arc { src: 0, dst: 1, label: Label::Eps, weight: Real(1.0) });
        assert!(matches!(
            determinize_minimize_boolean(&m2, true),
            Err(Error::EpsilonArcs(_))
        ));
    }

    #[test]
    fn epsilon_self_loop_becomes_star_factor() {
        let m: Wfsa<Real> = parse_wfsa(
            "start S\ninitial 0 1.0\nfinal 2 1.0\n0 0 <eps> 0.5\n0 1 a 1.0\n1 2 ^S 1.0",
        )
        .unwrap();
        let out = eliminate_epsilon_cycles(&m).unwrap();
        assert!(out.arcs.iter().all(|a| a.label != Label::Eps));
        let strings = enumerate_label_strings(&out, 2).unwrap();
        assert!((weight_of(&strings, &["a", "^S"]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_two_state_cycle_closure() {
        let m: Wfsa<Real> = parse_wfsa(
            "start S\ninitial 0 1.0\nfinal 3 1.0\n0 1 <eps> 0.5\n1 0 <eps> 0.5\n1 2 a 1.0\n2 3 ^S 1.0",
        )
        .unwrap();
        let out = eliminate_epsilon_cycles(&m).unwrap();
        let strings = enumerate_label_strings(&out, 2).unwrap();
        // closure factor 1/(1 - 0.25) applied to the 0 -> 1 hop
        assert!((weight_of(&strings, &["a", "^S"]) - 0.5 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn epsilon_acyclic_input_unchanged() {
        let m: Wfsa<Real> = parse_wfsa(
            "start S\ninitial 0 1.0\nfinal 2 1.0\n0 1 <eps> 0.5\n1 2 ^S 1.0",
        )
        .unwrap();
        let out = eliminate_epsilon_cycles(&m).unwrap();
        assert_eq!(out.serialize(), m.serialize());
    }

    #[test]
    fn nullary_elimination_preserves_strings() {
        let g = real("start: S\n0.5 S -> A S\n0.3 S -> b\n0.2 A ->\n0.8 A -> a");
        let null = null_weights(&g).unwrap();
        assert!((null[&g.symbols.get("A").unwrap()].0 - 0.2).abs() < 1e-12);
        let m = encode_cfg_as_wfsa(&g);
        let out = wfsa_eliminate_nullary(&m, &null).unwrap();
        let strings = enumerate_label_strings(&out, 3).unwrap();
        // no lone-hat strings survive
        assert!(strings.iter().all(|(s, _)| s.len() > 1));
        assert!((weight_of(&strings, &["A@ne", "S", "^S"]) - 0.5).abs() < 1e-12);
        assert!((weight_of(&strings, &["S", "^S"]) - 0.1).abs() < 1e-12);
        assert!((weight_of(&strings, &["b", "^S"]) - 0.3).abs() < 1e-12);
        assert!((weight_of(&strings, &["a", "^A@ne"]) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn nullary_elimination_nullable_start_adds_component() {
        let g = real("start: S\n0.5 S -> a S\n0.2 S ->\n0.3 S -> b");
        let null = null_weights(&g).unwrap();
        let m = encode_cfg_as_wfsa(&g);
        let out = wfsa_eliminate_nullary(&m, &null).unwrap();
        assert_eq!(out.symbols.name(out.start), "S@s");
        let strings = enumerate_label_strings(&out, 3).unwrap();
        assert!((weight_of(&strings, &["^S@s"]) - 0.2).abs() < 1e-12);
        assert!((weight_of(&strings, &["S@ne", "^S@s"]) - 1.0).abs() < 1e-12);
        assert!((weight_of(&strings, &["a", "S@ne", "^S@ne"]) - 0.5).abs() < 1e-12);
        assert!((weight_of(&strings, &["a", "^S@ne"]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn nullary_elimination_no_nullables_is_identity_on_strings() {
        let g = real(G1);
        let m = encode_cfg_as_wfsa(&g);
        let out = wfsa_eliminate_nullary(&m, &HashMap::new()).unwrap();
        let a = enumerate_label_strings(&m, 3).unwrap();
        let b = enumerate_label_strings(&out, 3).unwrap();
        assert_eq!(a.len(), b.len());
        for ((s1, w1), (s2, w2)) in a.iter().zip(&b) {
            assert_eq!(s1, s2);
            assert!((w1.0 - w2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unary_chain_extraction_matches_closed_form() {
        let g = real("start: A\n0.5 A -> B\n0.5 B -> A\n0.5 B -> b");
        let m = encode_cfg_as_wfsa(&g);
        let ch = extract_unary_chains(&m).unwrap();
        let a = g.symbols.get("A").unwrap();
        let b = g.symbols.get("B").unwrap();
        assert!(ch.same_nontrivial_scc(a, b));
        assert!((ch.chain[&(a, b)].0 - 2.0 / 3.0).abs() < 1e-12);
        assert!((ch.chain[&(a, a)].0 - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unary_elimination_collapses_cycle() {
        let g = real("start: A\n0.5 A -> B\n0.5 B -> A\n0.5 B -> b");
        let m = encode_cfg_as_wfsa(&g);
        let ch = extract_unary_chains(&m).unwrap();
        let out = wfsa_eliminate_unary(&m, &ch).unwrap();
        let strings = enumerate_label_strings(&out, 2).unwrap();
        // no unary-rule strings over nonterminals remain
        let nts = out.nonterminals();
        for (s, _) in &strings {
            if s.len() == 2 && s[1].starts_with('^') {
                let body = out.symbols.get(&s[0]);
                assert!(body.is_none_or(|b| !nts.contains(&b)), "unary rule left: {s:?}");
            }
        }
        assert!((weight_of(&strings, &["b", "^B"]) - 2.0 / 3.0).abs() < 1e-12);
        assert!((weight_of(&strings, &["b", "^A"]) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unary_elimination_keeps_cross_scc_rules() {
        let g = real("start: S\n1.0 S -> A\n0.5 A -> a");
        let m = encode_cfg_as_wfsa(&g);
        let ch = extract_unary_chains(&m).unwrap();
        assert!(ch.nontrivial.is_empty());
        let out = wfsa_eliminate_unary(&m, &ch).unwrap();
        let strings = enumerate_label_strings(&out, 2).unwrap();
        assert!((weight_of(&strings, &["A", "^S"]) - 1.0).abs() < 1e-12);
        assert!((weight_of(&strings, &["a", "^A"]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn side_tables_on_encoded_g1() {
        let g = real(G1);
        let mut m = encode_cfg_as_wfsa(&g);
        m.prune();
        let t = build_side_tables(&m).unwrap();
        let s = g.symbols.get("S").unwrap();
        let np = g.symbols.get("NP").unwrap();
        // initial state can advance over NP and reach ^S along the S path
        let q0 = *m.initial.keys().next().unwrap();
        assert!(t.can_advance.contains(&(q0, np)));
        assert!(t.can_end_in.contains(&(q0, s)));
        // every state along the S production path can end in S
        let path: Vec<u32> = m
            .arcs
            .iter()
            .filter(|a| matches!(a.label, Label::Hat(x) if x == s))
            .map(|a| a.src)
            .collect();
        for q in path {
            assert!(t.can_end_in.contains(&(q, s)));
        }
        // finality closure on the unique final state
        let (f, fw) = m.finals.iter().next().unwrap();
        assert!((fw.0 - 1.0).abs() < 1e-12);
        assert!((t.final_closure[f].0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn side_tables_epsilon_final_closure() {
        let m: Wfsa<Real> = parse_wfsa(
            "start S\ninitial 0 1.0\nfinal 2 1.0\n0 1 a 1.0\n1 2 <eps> 0.5",
        )
        .unwrap();
        let t = build_side_tables(&m).unwrap();
        assert!((t.final_closure[&1].0 - 0.5).abs() < 1e-12);
        assert!((t.final_closure[&2].0 - 1.0).abs() < 1e-12);
        assert!(!t.final_closure.contains_key(&0));
    }
}
