//! The CFG chart engines: a naive Earley deduction system run by unordered
//! forward chaining, and the indexed fast variant run with the prioritized
//! one-pass agenda (position-major, left endpoints descending, complete
//! nonterminals in unary-height order). The fast engine optionally computes
//! prefix weights (with left recursion collapsed through the precomputed
//! left-corner closure) and applies a one-word lookahead filter to
//! predictions.
//!
//! Both engines require preprocessed input: no nullary productions other
//! than `start -> ε` and no unary cycles.

use crate::error::{Error, Result};
use crate::grammar::{Grammar, Sym};
use crate::oracle::{lookup_tokens, DerivationTree, TreeChild};
use crate::semiring::{Semiring, Viterbi};
use crate::transform::{extended_left_corner_terminals, unary_heights, ClosureTables};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub items: usize,
    pub counts: BTreeMap<&'static str, u64>,
    /// Scan instantiations per input position (used by the FSA bound report).
    pub scans_per_position: Vec<u64>,
}

impl Stats {
    pub fn bump(&mut self, rule: &'static str, by: u64) {
        *self.counts.entry(rule).or_insert(0) += by;
    }
}

#[derive(Clone, Debug)]
pub struct ParseResult<W> {
    pub total: W,
    pub prefix: Option<Vec<W>>,
    pub best_tree: Option<DerivationTree>,
    pub stats: Stats,
}

/// Exact per-rule firing tallies of the run that produced `result`.
pub fn count_instantiations<W>(result: &ParseResult<W>) -> BTreeMap<&'static str, u64> {
    result.stats.counts.clone()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineOpts {
    pub prefix: bool,
    pub lookahead: bool,
}

fn validate_preprocessed<W: Semiring>(g: &Grammar<W>) -> Result<()> {
    for p in g.productions() {
        if p.rhs.is_empty() && p.lhs != g.start {
            return Err(Error::Precondition(format!(
                "nullary production for {} (run preprocessing first)",
                g.symbols.name(p.lhs)
            )));
        }
    }
    unary_heights(g).map(|_| ())
}

// ---------------------------------------------------------------------------
// Naive engine: Pred / Scan / Comp over dotted items, unordered exhaustive
// forward chaining with delta propagation.
// ---------------------------------------------------------------------------

const VIRT: u32 = u32::MAX; // virtual start production S'' -> S

struct NaiveItem<W> {
    i: u32,
    j: u32,
    r: u32,
    dot: u32,
    beta: W,
    pending: W,
    queued: bool,
    popped: bool,
}

pub fn recognize_naive<W: Semiring>(g: &Grammar<W>, x: &[&str]) -> Result<ParseResult<W>> {
    validate_preprocessed(g)?;
    let toks = lookup_tokens(g, x);
    let n = toks.len();
    let mut stats = Stats::default();
    if n == 0 {
        return Ok(ParseResult {
            total: g.start_epsilon_weight(),
            prefix: None,
            best_tree: None,
            stats,
        });
    }

    let virt_rhs = [g.start];
    let rhs_of = |r: u32| -> &[Sym] {
        if r == VIRT { &virt_rhs } else { &g.prod(r as usize).rhs }
    };

    let mut items: Vec<NaiveItem<W>> = Vec::new();
    let mut index: HashMap<(u32, u32, u32, u32), usize> = HashMap::new();
    // incomplete items by (right index, next nonterminal)
    let mut want: HashMap<(u32, Sym), Vec<usize>> = HashMap::new();
    // complete items by (left index, lhs)
    let mut done: HashMap<(u32, Sym), Vec<usize>> = HashMap::new();
    let mut agenda: Vec<usize> = Vec::new();

    macro_rules! lhs_of {
        ($r:expr) => {
            if $r == VIRT { None } else { Some(g.prod($r as usize).lhs) }
        };
    }

    let create = |items: &mut Vec<NaiveItem<W>>,
                      index: &mut HashMap<(u32, u32, u32, u32), usize>,
                      want: &mut HashMap<(u32, Sym), Vec<usize>>,
                      done: &mut HashMap<(u32, Sym), Vec<usize>>,
                      i: u32,
                      j: u32,
                      r: u32,
                      dot: u32| {
        let id = items.len();
        items.push(NaiveItem {
            i,
            j,
            r,
            dot,
            beta: W::zero(),
            pending: W::zero(),
            queued: false,
            popped: false,
        });
        index.insert((i, j, r, dot), id);
        let rhs = rhs_of(r);
        if (dot as usize) < rhs.len() {
            let next = rhs[dot as usize];
            if g.is_nonterminal(next) {
                want.entry((j, next)).or_default().push(id);
            }
        } else if let Some(lhs) = lhs_of!(r) {
            done.entry((i, lhs)).or_default().push(id);
        }
        id
    };

    // prove with a weight delta
    macro_rules! prove {
        ($i:expr, $j:expr, $r:expr, $dot:expr, $delta:expr) => {{
            let key = ($i, $j, $r, $dot);
            let id = match index.get(&key) {
                Some(&id) => id,
                None => create(&mut items, &mut index, &mut want, &mut done, $i, $j, $r, $dot),
            };
            items[id].pending = items[id].pending.plus(&$delta);
            if !items[id].queued {
                items[id].queued = true;
                agenda.push(id);
            }
        }};
    }

    // prediction proves idempotently with the rule weight
    macro_rules! predict {
        ($j:expr, $r:expr) => {{
            let key = ($j, $j, $r, 0u32);
            if !index.contains_key(&key) {
                let w = g.prod($r as usize).weight.clone();
                prove!($j, $j, $r, 0u32, w);
            }
        }};
    }

    prove!(0, 0, VIRT, 0, W::one());

    while let Some(id) = agenda.pop() {
        let delta = std::mem::replace(&mut items[id].pending, W::zero());
        items[id].queued = false;
        if delta.is_zero() {
            continue;
        }
        items[id].beta = items[id].beta.plus(&delta);
        let first_pop = !items[id].popped;
        items[id].popped = true;
        let (i, j, r, dot) = (items[id].i, items[id].j, items[id].r, items[id].dot);
        let rhs = rhs_of(r);
        if (dot as usize) < rhs.len() {
            let next = rhs[dot as usize];
            if g.is_nonterminal(next) {
                if first_pop {
                    // Pred: one instantiation per (trigger, rule of next)
                    for &pr in g.rules_of(next) {
                        stats.bump("pred", 1);
                        predict!(j, pr as u32);
                    }
                }
                // Comp with this item as the left antecedent
                let partners: Vec<usize> =
                    done.get(&(j, next)).cloned().unwrap_or_default();
                for v in partners {
                    if first_pop && items[v].popped {
                        stats.bump("comp", 1);
                    }
                    let add = delta.times(&items[v].beta);
                    if !add.is_zero() {
                        let k2 = items[v].j;
                        prove!(i, k2, r, dot + 1, add);
                    }
                }
            } else if (j as usize) < n && toks[j as usize] == Some(next) {
                if first_pop {
                    stats.bump("scan", 1);
                }
                prove!(i, j + 1, r, dot + 1, delta);
            }
        } else if let Some(lhs) = lhs_of!(r) {
            // Comp with this item as the complete antecedent
            let partners: Vec<usize> = want.get(&(i, lhs)).cloned().unwrap_or_default();
            for l in partners {
                if items[l].popped {
                    stats.bump("comp", 1);
                    let add = items[l].beta.times(&delta);
                    if !add.is_zero() {
                        let (li, lr, ld) = (items[l].i, items[l].r, items[l].dot);
                        prove!(li, j, lr, ld + 1, add);
                    }
                }
            }
        }
    }

    let total = index
        .get(&(0, n as u32, VIRT, 1))
        .map(|&id| items[id].beta.clone())
        .unwrap_or_else(W::zero);
    stats.items = items.len();
    Ok(ParseResult { total, prefix: None, best_tree: None, stats })
}

// ---------------------------------------------------------------------------
// Fast engine (Pred1/Pred2/Scan/Comp1/Comp2, plus Start/Pred1lr/Pos in prefix
// mode), run with the one-pass priority scheme.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Dotted { i: u32, j: u32, r: u32, dot: u32 },
    PStar { j: u32, b: Sym },
    CStar { i: u32, j: u32, b: Sym },
}

struct ItemState<W> {
    key: Key,
    beta: W,
    alpha: W,
    popped: bool,
}

struct Fast<'g, W: Semiring> {
    g: &'g Grammar<W>,
    toks: Vec<Option<Sym>>,
    n: usize,
    opts: EngineOpts,
    tables: Option<&'g ClosureTables<W>>,
    lookahead: Option<HashMap<Sym, HashSet<Sym>>>,
    heights: HashMap<Sym, u32>,

    items: Vec<ItemState<W>>,
    index: HashMap<Key, usize>,
    want: HashMap<(u32, Sym), Vec<usize>>,
    complete_dotted: HashMap<(u32, u32, Sym), Vec<usize>>,
    form3: HashMap<(u32, u32), Vec<usize>>,
    form5: HashMap<u32, Vec<usize>>,
    form6: HashMap<u32, Vec<usize>>,
    pk: HashMap<u32, Vec<usize>>,
    qk: Vec<Vec<bool>>,
    qjk: HashMap<(u32, u32), (BinaryHeap<Reverse<(u32, Sym)>>, HashSet<Sym>)>,
    // pop cursors: a re-scheduled span resumes where it left off
    complete_cursor: HashMap<(u32, u32, Sym), usize>,
    form3_cursor: HashMap<(u32, u32), usize>,
    prefix: Vec<W>,
    stats: Stats,
}

impl<'g, W: Semiring> Fast<'g, W> {
    fn la_pass(&self, b: Sym, k: u32) -> bool {
        let Some(la) = &self.lookahead else { return true };
        let Some(next) = self.toks.get(k as usize).copied().flatten() else {
            return false; // no next token: no prediction can ever scan
        };
        la.get(&b).is_some_and(|set| set.contains(&next))
    }

    fn get_or_create(&mut self, key: Key) -> (usize, bool) {
        if let Some(&id) = self.index.get(&key) {
            return (id, false);
        }
        let id = self.items.len();
        self.items.push(ItemState { key, beta: W::zero(), alpha: W::zero(), popped: false });
        self.index.insert(key, id);
        match key {
            Key::Dotted { i, j, r, dot } => {
                let p = self.g.prod(r as usize);
                if (dot as usize) < p.rhs.len() {
                    let next = p.rhs[dot as usize];
                    if self.g.is_nonterminal(next) {
                        self.want.entry((j, next)).or_default().push(id);
                    }
                    if dot > 0 {
                        self.form3.entry((i, j)).or_default().push(id);
                        self.schedule(i, j);
                    } else if self.opts.prefix {
                        self.form6.entry(j).or_default().push(id);
                    } else {
                        self.pk.entry(j).or_default().push(id);
                    }
                } else if dot > 0 || p.rhs.is_empty() {
                    // complete
                    self.complete_dotted.entry((i, j, p.lhs)).or_default().push(id);
                    let h = *self.heights.get(&p.lhs).unwrap_or(&0);
                    let (heap, seen) = self.qjk.entry((i, j)).or_default();
                    if seen.insert(p.lhs) {
                        heap.push(Reverse((h, p.lhs)));
                    }
                    self.schedule(i, j);
                }
            }
            Key::PStar { j, b: _ } => {
                if self.opts.prefix {
                    self.form5.entry(j).or_default().push(id);
                } else {
                    self.pk.entry(j).or_default().push(id);
                }
            }
            Key::CStar { .. } => {}
        }
        (id, true)
    }

    fn schedule(&mut self, j: u32, k: u32) {
        self.qk[k as usize][j as usize] = true;
    }

    fn add_beta_alpha(&mut self, id: usize, beta: &W, alpha: &W) {
        debug_assert!(
            !self.items[id].popped || beta.is_zero(),
            "inside weight of a popped item changed: {:?}",
            self.items[id].key
        );
        self.items[id].beta = self.items[id].beta.plus(beta);
        self.items[id].alpha = self.items[id].alpha.plus(alpha);
    }

    fn run(&mut self) -> Result<()> {
        self.seed()?;
        for k in 0..=self.n as u32 {
            self.process_j_loop(k);
            self.forms_phase(k);
            self.process_j_loop(k);
        }
        Ok(())
    }

    fn seed(&mut self) -> Result<()> {
        if self.opts.prefix {
            let tables = self.tables.ok_or(Error::NeedsTables)?;
            // Start rule: predict every left corner of the start symbol at 0
            let mut seeds: Vec<(Sym, W)> = tables
                .left_corner
                .iter()
                .filter(|((c, _), _)| *c == self.g.start)
                .map(|((_, b), w)| (*b, w.clone()))
                .collect();
            seeds.sort_by_key(|(b, _)| *b);
            for (b, w) in seeds {
                if !self.la_pass(b, 0) {
                    continue;
                }
                self.stats.bump("start", 1);
                let (id, _) = self.get_or_create(Key::PStar { j: 0, b });
                self.items[id].beta = W::one();
                self.items[id].alpha = self.items[id].alpha.plus(&w);
            }
        } else {
            let (id, _) = self.get_or_create(Key::PStar { j: 0, b: self.g.start });
            self.items[id].beta = W::one();
        }
        Ok(())
    }

    fn process_j_loop(&mut self, k: u32) {
        // left endpoints descending, k itself last
        loop {
            let order = (0..k).rev().chain(std::iter::once(k));
            let mut any = false;
            for j in order {
                if self.qk[k as usize][j as usize] {
                    self.qk[k as usize][j as usize] = false;
                    self.process_span(j, k);
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
    }

    fn process_span(&mut self, j: u32, k: u32) {
        // forms 1 and 2, complete nonterminals in unary-height order
        loop {
            let b = {
                let Some((heap, _)) = self.qjk.get_mut(&(j, k)) else { break };
                let Some(Reverse((_, b))) = heap.pop() else { break };
                b
            };
            loop {
                let idx = *self.complete_cursor.get(&(j, k, b)).unwrap_or(&0);
                let Some(&u) = self
                    .complete_dotted
                    .get(&(j, k, b))
                    .and_then(|v| v.get(idx))
                else {
                    break;
                };
                self.complete_cursor.insert((j, k, b), idx + 1);
                self.items[u].popped = true;
                self.comp1(u, j, k, b);
                self.pos(u, k);
            }
            if let Some(&cs) = self.index.get(&Key::CStar { i: j, j: k, b }) {
                self.items[cs].popped = true;
                self.comp2(cs, j, k, b);
            }
        }
        // form 3
        loop {
            let idx = *self.form3_cursor.get(&(j, k)).unwrap_or(&0);
            let Some(&u) = self.form3.get(&(j, k)).and_then(|v| v.get(idx)) else {
                break;
            };
            self.form3_cursor.insert((j, k), idx + 1);
            self.items[u].popped = true;
            self.scan(u, k);
            self.pos(u, k);
            self.predict_from(u, k);
        }
    }

    fn forms_phase(&mut self, k: u32) {
        if self.opts.prefix {
            let mut idx = 0;
            loop {
                let Some(&u) = self.form5.get(&k).and_then(|v| v.get(idx)) else { break };
                idx += 1;
                self.items[u].popped = true;
                self.pred2(u, k);
            }
            let mut idx = 0;
            loop {
                let Some(&u) = self.form6.get(&k).and_then(|v| v.get(idx)) else { break };
                idx += 1;
                self.items[u].popped = true;
                self.scan(u, k);
            }
        } else {
            // LIFO over predicted star and dotted items at k
            while let Some(u) = self.pk.get_mut(&k).and_then(Vec::pop) {
                self.items[u].popped = true;
                match self.items[u].key {
                    Key::PStar { .. } => self.pred2(u, k),
                    Key::Dotted { .. } => {
                        self.scan(u, k);
                        self.predict_from(u, k);
                    }
                    Key::CStar { .. } => unreachable!(),
                }
            }
        }
    }

    // Comp1: complete dotted item feeds the complete-star item
    fn comp1(&mut self, u: usize, j: u32, k: u32, b: Sym) {
        self.stats.bump("comp1", 1);
        let beta = self.items[u].beta.clone();
        let alpha = self.items[u].alpha.clone();
        let (cs, _) = self.get_or_create(Key::CStar { i: j, j: k, b });
        // the complete-star alpha is accumulated for debuggability but unused
        self.add_beta_alpha(cs, &beta, &alpha);
    }

    // Comp2: attach the complete-star item to everything waiting for b at j
    fn comp2(&mut self, cs: usize, j: u32, k: u32, b: Sym) {
        let cs_beta = self.items[cs].beta.clone();
        let partners: Vec<usize> = self.want.get(&(j, b)).cloned().unwrap_or_default();
        for l in partners {
            self.stats.bump("comp2", 1);
            let Key::Dotted { i, r, dot, .. } = self.items[l].key else { unreachable!() };
            let beta = self.items[l].beta.times(&cs_beta);
            let alpha = self.items[l].alpha.clone();
            let (id, _) = self.get_or_create(Key::Dotted { i, j: k, r, dot: dot + 1 });
            self.add_beta_alpha(id, &beta, &alpha);
        }
    }

    fn scan(&mut self, u: usize, k: u32) {
        let Key::Dotted { i, r, dot, .. } = self.items[u].key else { return };
        let p = self.g.prod(r as usize);
        let Some(&next) = p.rhs.get(dot as usize) else { return };
        if self.g.is_nonterminal(next) {
            return;
        }
        if (k as usize) < self.n && self.toks[k as usize] == Some(next) {
            self.stats.bump("scan", 1);
            let beta = self.items[u].beta.clone();
            let alpha = self.items[u].alpha.clone();
            let (id, _) = self.get_or_create(Key::Dotted { i, j: k + 1, r, dot: dot + 1 });
            self.add_beta_alpha(id, &beta, &alpha);
        }
    }

    // Pos: items whose dot follows a terminal contribute to the prefix weight
    fn pos(&mut self, u: usize, k: u32) {
        if !self.opts.prefix {
            return;
        }
        let Key::Dotted { r, dot, .. } = self.items[u].key else { return };
        if dot == 0 {
            return;
        }
        let p = self.g.prod(r as usize);
        let last = p.rhs[dot as usize - 1];
        if self.g.is_nonterminal(last) {
            return;
        }
        self.stats.bump("pos", 1);
        let z_nu = self.tables.unwrap().suffix_product[&(r as usize, dot as usize)].clone();
        let add = self.items[u].alpha.times(&self.items[u].beta).times(&z_nu);
        self.prefix[k as usize] = self.prefix[k as usize].plus(&add);
    }

    // Pred1 (cyclic, prefix off) or Pred1lr (acyclic, prefix on)
    fn predict_from(&mut self, u: usize, k: u32) {
        let Key::Dotted { r, dot, .. } = self.items[u].key else { return };
        let p = self.g.prod(r as usize);
        let Some(&next) = p.rhs.get(dot as usize) else { return };
        if !self.g.is_nonterminal(next) {
            return;
        }
        if self.opts.prefix {
            if dot == 0 {
                return; // Pred1lr requires progress left of the dot
            }
            let tables = self.tables.unwrap();
            let mut targets: Vec<(Sym, W)> = tables
                .left_corner
                .iter()
                .filter(|((c, _), _)| *c == next)
                .map(|((_, b), w)| (*b, w.clone()))
                .collect();
            targets.sort_by_key(|(b, _)| *b);
            let alpha_u = self.items[u].alpha.clone();
            let beta_u = self.items[u].beta.clone();
            for (b, lc) in targets {
                if !self.la_pass(b, k) {
                    continue;
                }
                self.stats.bump("pred1lr", 1);
                let (id, _) = self.get_or_create(Key::PStar { j: k, b });
                self.items[id].beta = W::one();
                let add = alpha_u.times(&lc).times(&beta_u);
                self.items[id].alpha = self.items[id].alpha.plus(&add);
            }
        } else {
            if !self.la_pass(next, k) {
                return;
            }
            self.stats.bump("pred1", 1);
            let (id, created) = self.get_or_create(Key::PStar { j: k, b: next });
            if created {
                self.items[id].beta = W::one();
            }
            // re-proofs are ignored: the star item is only a side condition
        }
    }

    // Pred2: expand a predict-star item into dotted commitments
    fn pred2(&mut self, u: usize, k: u32) {
        let Key::PStar { b, .. } = self.items[u].key else { return };
        let alpha = self.items[u].alpha.clone();
        for &r in self.g.rules_of(b).to_vec().iter() {
            self.stats.bump("pred2", 1);
            let w = self.g.prod(r).weight.clone();
            let (id, _) = self.get_or_create(Key::Dotted { i: k, j: k, r: r as u32, dot: 0 });
            self.add_beta_alpha(id, &w, &alpha);
        }
    }
}

pub fn recognize_fast<W: Semiring>(
    g: &Grammar<W>,
    tables: Option<&ClosureTables<W>>,
    x: &[&str],
    opts: EngineOpts,
) -> Result<ParseResult<W>> {
    validate_preprocessed(g)?;
    if opts.prefix && tables.is_none() {
        return Err(Error::NeedsTables);
    }
    let toks = lookup_tokens(g, x);
    let n = toks.len();
    if n == 0 {
        return Ok(ParseResult {
            total: g.start_epsilon_weight(),
            prefix: opts.prefix.then(Vec::new),
            best_tree: None,
            stats: Stats::default(),
        });
    }
    let heights = unary_heights(g)?;
    let lookahead = opts.lookahead.then(|| extended_left_corner_terminals(g));
    let mut engine = Fast {
        g,
        toks,
        n,
        opts,
        tables,
        lookahead,
        heights,
        items: Vec::new(),
        index: HashMap::new(),
        want: HashMap::new(),
        complete_dotted: HashMap::new(),
        form3: HashMap::new(),
        form5: HashMap::new(),
        form6: HashMap::new(),
        pk: HashMap::new(),
        qk: (0..=n).map(|k| vec![false; k + 1]).collect(),
        qjk: HashMap::new(),
        complete_cursor: HashMap::new(),
        form3_cursor: HashMap::new(),
        prefix: vec![W::zero(); n + 1],
        stats: Stats::default(),
    };
    engine.run()?;

    let total = engine
        .index
        .get(&Key::CStar { i: 0, j: n as u32, b: g.start })
        .map(|&id| engine.items[id].beta.clone())
        .unwrap_or_else(W::zero);
    let prefix = opts.prefix.then(|| engine.prefix[1..=n].to_vec());
    let mut stats = engine.stats;
    stats.items = engine.items.len();
    Ok(ParseResult { total, prefix, best_tree: None, stats })
}

/// Runs the fast engine under the Viterbi semiring and decodes the winning
/// backpointer sequence (production ids in preorder) into a derivation tree.
pub fn best_derivation(g: &Grammar<Viterbi>, x: &[&str]) -> Result<ParseResult<Viterbi>> {
    // re-attach backpointer tokens so the path decodes against g itself
    let prods = g
        .productions()
        .iter()
        .enumerate()
        .map(|(i, p)| crate::grammar::Production {
            lhs: p.lhs,
            rhs: p.rhs.clone(),
            weight: p.weight.attach_token(i as u32),
        })
        .collect();
    let g2 = Grammar::new(g.symbols.clone(), prods, g.start);
    let mut result = recognize_fast(&g2, None, x, EngineOpts::default())?;
    if !result.total.is_zero() {
        let mut pos = 0;
        result.best_tree = Some(decode_tree(&g2, &result.total.path, &mut pos));
    }
    Ok(result)
}

fn decode_tree(g: &Grammar<Viterbi>, path: &[u32], pos: &mut usize) -> DerivationTree {
    let r = path[*pos] as usize;
    *pos += 1;
    let p = g.prod(r);
    let children = p
        .rhs
        .iter()
        .map(|&s| {
            if g.is_nonterminal(s) {
                TreeChild::Node(decode_tree(g, path, pos))
            } else {
                TreeChild::Leaf(s)
            }
        })
        .collect();
    DerivationTree { prod: r, sym: p.lhs, children }
}
