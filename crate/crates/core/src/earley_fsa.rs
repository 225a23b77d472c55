//! Recognition over the single-WFSA grammar representation. Items carry
//! automaton states instead of dotted productions; Scan, Comp2, and Epsilon
//! produce provisional items that the Filter rule admits only when some
//! prediction at the left endpoint can still be completed from the reached
//! state. A binarized variant factors Scan and both completion rules through
//! intermediate items; it computes identical weights and differs only in
//! instantiation counts.
//!
//! Requires preprocessed input: epsilon-acyclic, no nullary rules except the
//! start's, no unary cycles.

use crate::earley::{ParseResult, Stats};
use crate::error::{Error, Result};
use crate::grammar::Sym;
use crate::semiring::Semiring;
use crate::wfsa::{extract_unary_chains, Label, SideTables, Wfsa};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

/// Longest-path depth of each nonterminal in the (acyclic) graph of
/// rule-shaped strings `B Â`; orders complete-star pops within a span.
fn fsa_unary_heights<W: Semiring>(m: &Wfsa<W>) -> Result<HashMap<Sym, u32>> {
    let chains = extract_unary_chains(m)?;
    if !chains.nontrivial.is_empty() {
        return Err(Error::Precondition(
            "automaton has unary cycles (run unary elimination first)".into(),
        ));
    }
    let mut heights: HashMap<Sym, u32> = HashMap::new();
    fn depth<W>(
        a: Sym,
        unary: &HashMap<(Sym, Sym), W>,
        heights: &mut HashMap<Sym, u32>,
    ) -> u32 {
        if let Some(&h) = heights.get(&a) {
            return h;
        }
        let mut h = 0;
        for (&(lhs, b), _) in unary.iter() {
            if lhs == a {
                h = h.max(1 + depth(b, unary, heights));
            }
        }
        heights.insert(a, h);
        h
    }
    let nts: Vec<Sym> = m.nonterminals().into_iter().collect();
    for a in nts {
        depth(a, &chains.unary, &mut heights);
    }
    Ok(heights)
}

fn validate_epsilon_acyclic<W: Semiring>(m: &Wfsa<W>) -> Result<()> {
    let edges: Vec<(usize, usize)> = m
        .arcs
        .iter()
        .filter(|a| a.label == Label::Eps)
        .map(|a| (a.src as usize, a.dst as usize))
        .collect();
    let cyclic = edges.iter().any(|(s, d)| s == d)
        || crate::graph::sccs(m.n_states, &edges).iter().any(|c| c.len() > 1);
    if cyclic {
        Err(Error::Precondition(
            "automaton has epsilon cycles (run epsilon-cycle elimination first)".into(),
        ))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum FKey {
    State { i: u32, j: u32, q: u32 },
    Prov { i: u32, j: u32, q: u32 },
    CStar { i: u32, j: u32, a: Sym },
}

struct FItem<W> {
    key: FKey,
    beta: W,
    pending: W,
    popped: bool,
    queued: bool,
}

struct FsaEngine<'a, W: Semiring> {
    m: &'a Wfsa<W>,
    tables: &'a SideTables<W>,
    toks: Vec<Option<Sym>>,
    binarized: bool,
    out: Vec<Vec<usize>>,
    nts: HashSet<Sym>,
    heights: HashMap<Sym, u32>,

    items: Vec<FItem<W>>,
    index: HashMap<FKey, usize>,
    // (j, A) -> left states [i,j,q] paired with their A-labeled arcs
    want: HashMap<(u32, Sym), Vec<(usize, usize)>>,
    pstar: Vec<HashSet<Sym>>,
    seeded: Vec<bool>,
    pending_prov: HashMap<(u32, u32), Vec<usize>>,
    cstar_heap: HashMap<(u32, u32), (BinaryHeap<Reverse<(u32, Sym)>>, HashSet<Sym>)>,
    stats: Stats,
}

impl<'a, W: Semiring> FsaEngine<'a, W> {
    fn get_or_create(&mut self, key: FKey) -> usize {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.items.len();
        self.items.push(FItem {
            key,
            beta: W::zero(),
            pending: W::zero(),
            popped: false,
            queued: false,
        });
        self.index.insert(key, id);
        id
    }

    fn add_prov(&mut self, i: u32, j: u32, q: u32, delta: W) {
        if delta.is_zero() {
            return;
        }
        let id = self.get_or_create(FKey::Prov { i, j, q });
        self.items[id].pending = self.items[id].pending.plus(&delta);
        if !self.items[id].queued {
            self.items[id].queued = true;
            self.pending_prov.entry((i, j)).or_default().push(id);
        }
    }

    fn cstar_add(&mut self, i: u32, j: u32, a: Sym, delta: W) {
        if delta.is_zero() {
            return;
        }
        let id = self.get_or_create(FKey::CStar { i, j, a });
        debug_assert!(!self.items[id].popped, "complete-star item grew after its pop");
        self.items[id].beta = self.items[id].beta.plus(&delta);
        let h = *self.heights.get(&a).unwrap_or(&0);
        let (heap, seen) = self.cstar_heap.entry((i, j)).or_default();
        if seen.insert(a) {
            heap.push(Reverse((h, a)));
        }
    }

    fn filter_passes(&self, j: u32, q: u32) -> bool {
        self.pstar[j as usize]
            .iter()
            .any(|&a| self.tables.can_end_in.contains(&(q, a)))
    }

    /// Fires every linear consequent of a state delta at span (j, k).
    fn fire_state(&mut self, id: usize, j: u32, k: u32) {
        let delta = std::mem::replace(&mut self.items[id].pending, W::zero());
        self.items[id].queued = false;
        if delta.is_zero() {
            return;
        }
        self.items[id].beta = self.items[id].beta.plus(&delta);
        let first = !self.items[id].popped;
        self.items[id].popped = true;
        let FKey::State { q, .. } = self.items[id].key else { unreachable!() };
        let arcs: Vec<(u32, Label, W)> = self.out[q as usize]
            .iter()
            .map(|&ai| {
                let a = &self.m.arcs[ai];
                (a.dst, a.label, a.weight.clone())
            })
            .collect();
        let next_tok = self.toks.get(k as usize).copied().flatten();
        let mut scan_matched = false;
        let mut predicted: HashSet<Sym> = HashSet::new();
        let mut hat_done: HashSet<Sym> = HashSet::new();
        for (dst, label, w) in &arcs {
            match *label {
                Label::Eps => {
                    if first {
                        self.stats.bump("epsilon", 1);
                    }
                    self.add_prov(j, k, *dst, delta.times(w));
                }
                Label::Plain(t) if self.nts.contains(&t) => {
                    if first {
                        // the binarized completion intermediate, one per arc
                        if self.binarized {
                            self.stats.bump("comp2a", 1);
                        }
                        // Pred1 once per (state, nonterminal)
                        if predicted.insert(t) {
                            self.stats.bump("pred1", 1);
                            self.pstar[k as usize].insert(t);
                        }
                    }
                }
                Label::Plain(t) => {
                    if Some(t) == next_tok {
                        if first {
                            if !scan_matched {
                                scan_matched = true;
                                self.stats.bump(if self.binarized { "scan1" } else { "scan" }, 1);
                            }
                            if self.binarized {
                                self.stats.bump("scan2", 1);
                            }
                            if let Some(slot) =
                                self.stats.scans_per_position.get_mut(k as usize)
                            {
                                *slot += 1;
                            }
                        }
                        self.add_prov(j, k + 1, *dst, delta.times(w));
                    }
                }
                Label::Hat(a) => {
                    if self.binarized {
                        // Comp1b against the precomputed hat-finality table
                        if hat_done.insert(a) {
                            if let Some(hf) = self.tables.hat_final.get(&(q, a)).cloned() {
                                if first {
                                    self.stats.bump("comp1b", 1);
                                }
                                self.cstar_add(j, k, a, delta.times(&hf));
                            }
                        }
                    } else if let Some(fc) = self.tables.final_closure.get(dst).cloned() {
                        if first {
                            self.stats.bump("comp1", 1);
                        }
                        self.cstar_add(j, k, a, delta.times(w).times(&fc));
                    }
                }
            }
        }
        // register this state in the completion want-index once
        if first {
            let entries: Vec<(Sym, usize)> = self.out[q as usize]
                .iter()
                .filter_map(|&ai| match self.m.arcs[ai].label {
                    Label::Plain(t) if self.nts.contains(&t) => Some((t, ai)),
                    _ => None,
                })
                .collect();
            for (t, ai) in entries {
                self.want.entry((k, t)).or_default().push((id, ai));
            }
        }
    }

    /// Runs span (j, k) to convergence: Filter, state deltas, then
    /// complete-star pops in unary-height order. On the diagonal the
    /// prediction set can still grow, so rejected provisionals are retried
    /// and the initial states are seeded lazily.
    fn process_span(&mut self, j: u32, k: u32) {
        let diag = j == k;
        let mut rejected: Vec<usize> = Vec::new();
        loop {
            let mut progressed = false;
            if diag && !self.seeded[k as usize] && !self.pstar[k as usize].is_empty() {
                self.seeded[k as usize] = true;
                progressed = true;
                let initial: Vec<(u32, W)> =
                    self.m.initial.iter().map(|(&q, w)| (q, w.clone())).collect();
                for (q, w) in initial {
                    self.stats.bump("pred2", 1);
                    let id = self.get_or_create(FKey::State { i: k, j: k, q });
                    self.items[id].pending = self.items[id].pending.plus(&w);
                    self.fire_state(id, j, k);
                }
            }
            // Filter pending provisional items
            while let Some(pid) = self.pending_prov.get_mut(&(j, k)).and_then(Vec::pop) {
                progressed = true;
                self.items[pid].queued = false;
                let FKey::Prov { q, .. } = self.items[pid].key else { unreachable!() };
                if self.filter_passes(j, q) {
                    self.stats.bump("filter", 1);
                    let delta = std::mem::replace(&mut self.items[pid].pending, W::zero());
                    self.items[pid].beta = self.items[pid].beta.plus(&delta);
                    let sid = self.get_or_create(FKey::State { i: j, j: k, q });
                    self.items[sid].pending = self.items[sid].pending.plus(&delta);
                    self.fire_state(sid, j, k);
                } else if diag {
                    rejected.push(pid);
                    self.items[pid].queued = true;
                }
            }
            if progressed {
                continue;
            }
            // pop the lowest complete-star item, if any
            let popped = {
                let Some((heap, _)) = self.cstar_heap.get_mut(&(j, k)) else { break };
                heap.pop()
            };
            let Some(Reverse((_, a))) = popped else {
                // diagonal retry: prediction growth may admit rejected items
                if diag && !rejected.is_empty() {
                    let retry: Vec<usize> = std::mem::take(&mut rejected);
                    let any_pass = retry.iter().any(|&pid| {
                        let FKey::Prov { q, .. } = self.items[pid].key else { unreachable!() };
                        self.filter_passes(j, q)
                    });
                    for pid in retry {
                        self.items[pid].queued = false;
                        let FKey::Prov { i, j: pj, q } = self.items[pid].key else {
                            unreachable!()
                        };
                        let delta = std::mem::replace(&mut self.items[pid].pending, W::zero());
                        self.add_prov(i, pj, q, delta);
                    }
                    if any_pass {
                        continue;
                    }
                }
                break;
            };
            let cid = self.index[&FKey::CStar { i: j, j: k, a }];
            self.items[cid].popped = true;
            let cbeta = self.items[cid].beta.clone();
            // Comp2: attach to every left state waiting on (j, a)
            let partners: Vec<(usize, usize)> =
                self.want.get(&(j, a)).cloned().unwrap_or_default();
            for (lid, ai) in partners {
                self.stats.bump(if self.binarized { "comp2b" } else { "comp2" }, 1);
                let arc = &self.m.arcs[ai];
                let (dst, w) = (arc.dst, arc.weight.clone());
                let FKey::State { i: li, .. } = self.items[lid].key else { unreachable!() };
                let add = self.items[lid].beta.times(&cbeta).times(&w);
                self.add_prov(li, k, dst, add);
            }
        }
    }
}

fn run_fsa<W: Semiring>(
    m: &Wfsa<W>,
    tables: &SideTables<W>,
    x: &[&str],
    binarized: bool,
) -> Result<ParseResult<W>> {
    validate_epsilon_acyclic(m)?;
    let heights = fsa_unary_heights(m)?;
    let toks: Vec<Option<Sym>> = x.iter().map(|t| m.symbols.get(t)).collect();
    let n = toks.len();
    let mut eng = FsaEngine {
        m,
        tables,
        toks,
        binarized,
        out: m.out_index(),
        nts: m.nonterminals(),
        heights,
        items: Vec::new(),
        index: HashMap::new(),
        want: HashMap::new(),
        pstar: vec![HashSet::new(); n + 1],
        seeded: vec![false; n + 1],
        pending_prov: HashMap::new(),
        cstar_heap: HashMap::new(),
        stats: Stats { scans_per_position: vec![0; n], ..Stats::default() },
    };
    eng.pstar[0].insert(m.start);
    for k in 0..=n as u32 {
        for j in (0..k).rev() {
            eng.process_span(j, k);
        }
        eng.process_span(k, k);
    }
    let total = eng
        .index
        .get(&FKey::CStar { i: 0, j: n as u32, a: m.start })
        .map(|&id| eng.items[id].beta.clone())
        .unwrap_or_else(W::zero);
    let mut stats = eng.stats;
    stats.items = eng.items.len();
    Ok(ParseResult { total, prefix: None, best_tree: None, stats })
}

pub fn recognize_fsa<W: Semiring>(
    m: &Wfsa<W>,
    tables: &SideTables<W>,
    x: &[&str],
) -> Result<ParseResult<W>> {
    run_fsa(m, tables, x, false)
}

pub fn recognize_fsa_binarized<W: Semiring>(
    m: &Wfsa<W>,
    tables: &SideTables<W>,
    x: &[&str],
) -> Result<ParseResult<W>> {
    run_fsa(m, tables, x, true)
}

/// Measured per-position scan work against the refined bound's terms.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub n_states: usize,
    /// max number of same-terminal arcs out of one state
    pub c: usize,
    pub nonterminal_arcs: usize,
    pub per_position_scans: Vec<u64>,
    /// (k+1) * |Q| * max(c, 1) for each position k
    pub per_position_bound: Vec<u64>,
}

impl BoundReport {
    pub fn within_bound(&self) -> bool {
        self.per_position_scans
            .iter()
            .zip(&self.per_position_bound)
            .all(|(s, b)| s <= b)
    }
}

pub fn fsa_runtime_bound_report<W: Semiring>(
    result: &ParseResult<W>,
    m: &Wfsa<W>,
) -> BoundReport {
    let nts = m.nonterminals();
    let mut per_state_term: HashMap<(u32, Sym), usize> = HashMap::new();
    let mut nonterminal_arcs = 0;
    for a in &m.arcs {
        match a.label {
            Label::Plain(t) if nts.contains(&t) => nonterminal_arcs += 1,
            Label::Plain(t) => *per_state_term.entry((a.src, t)).or_insert(0) += 1,
            _ => {}
        }
    }
    let c = per_state_term.values().copied().max().unwrap_or(0);
    let per_position_scans = result.stats.scans_per_position.clone();
    let per_position_bound = (0..per_position_scans.len())
        .map(|k| ((k + 1) * m.n_states * c.max(1)) as u64)
        .collect();
    BoundReport {
        n_states: m.n_states,
        c,
        nonterminal_arcs,
        per_position_scans,
        per_position_bound,
    }
}
