//! Seeded generators for the test and benchmark suites: random grammars in
//! several shapes (engine-ready, messy with epsilon rules and unary cycles,
//! tight PCFGs), random sentences sampled from a grammar's own language, and
//! the bundled deterministic benchmark grammars.
//!
//! Grammars are generated structurally with probability-scale weights and
//! materialized into any semiring through `Semiring::from_magnitude`, so one
//! structural grammar yields comparable instances under every carrier.

use crate::grammar::{Grammar, Production, SymbolTable};
use crate::semiring::Semiring;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use std::collections::{HashMap, HashSet};

/// A grammar over plain strings with probability-scale weights.
#[derive(Clone, Debug)]
pub struct RawGrammar {
    pub start: String,
    pub prods: Vec<(String, Vec<String>, f64)>,
}

impl RawGrammar {
    pub fn materialize<W: Semiring>(&self) -> Grammar<W> {
        let mut symbols = SymbolTable::new();
        let start = symbols.intern(&self.start);
        let prods = self
            .prods
            .iter()
            .map(|(lhs, rhs, p)| Production {
                lhs: symbols.intern(lhs),
                rhs: rhs.iter().map(|t| symbols.intern(t)).collect(),
                weight: W::from_magnitude(*p),
            })
            .collect();
        Grammar::new(symbols, prods, start)
    }

    pub fn to_wcfg(&self) -> String {
        let mut out = format!("start: {}\n", self.start);
        for (lhs, rhs, p) in &self.prods {
            out.push_str(&format!("{} {} -> {}\n", p, lhs, rhs.join(" ")));
        }
        out
    }

    pub fn nonterminal_names(&self) -> HashSet<&str> {
        self.prods.iter().map(|(lhs, _, _)| lhs.as_str()).collect()
    }

    /// Samples one yield of the start symbol, or None if the attempt blows
    /// past `max_len` or the depth cap.
    pub fn sample_sentence(&self, rng: &mut StdRng, max_len: usize) -> Option<Vec<String>> {
        let mut rules: HashMap<&str, Vec<(&[String], f64)>> = HashMap::new();
        for (lhs, rhs, p) in &self.prods {
            rules.entry(lhs).or_default().push((rhs.as_slice(), *p));
        }
        let mut stack: Vec<&str> = vec![&self.start];
        let mut out: Vec<String> = Vec::new();
        let mut steps = 0;
        while let Some(sym) = stack.pop() {
            steps += 1;
            if steps > 200 || out.len() > max_len {
                return None;
            }
            match rules.get(sym) {
                Some(alts) => {
                    let total: f64 = alts.iter().map(|(_, p)| p).sum();
                    let mut pick = rng.gen_range(0.0..total.max(1e-300));
                    let mut chosen = alts[alts.len() - 1].0;
                    for (rhs, p) in alts {
                        if pick < *p {
                            chosen = rhs;
                            break;
                        }
                        pick -= p;
                    }
                    for s in chosen.iter().rev() {
                        stack.push(s);
                    }
                }
                None => out.push(sym.to_string()),
            }
        }
        (out.len() <= max_len).then_some(out)
    }
}

/// Sentences for an equivalence suite: sampled yields plus a few random
/// token strings (which may well have weight zero).
pub fn sample_sentences(
    raw: &RawGrammar,
    rng: &mut StdRng,
    count: usize,
    max_len: usize,
) -> Vec<Vec<String>> {
    let nts = raw.nonterminal_names();
    let terminals: Vec<&String> = raw
        .prods
        .iter()
        .flat_map(|(_, rhs, _)| rhs.iter())
        .filter(|t| !nts.contains(t.as_str()))
        .collect();
    let mut out = Vec::new();
    let mut misses = 0;
    while out.len() < count && misses < count * 30 {
        if out.len() % 4 == 3 && !terminals.is_empty() {
            // random token soup
            let len = rng.gen_range(1..=max_len);
            out.push(
                (0..len)
                    .map(|_| (*terminals.choose(rng).unwrap()).clone())
                    .collect(),
            );
        } else {
            match raw.sample_sentence(rng, max_len) {
                Some(x) if !x.is_empty() => out.push(x),
                _ => misses += 1,
            }
        }
    }
    out
}

/// Engine-ready random grammar: no epsilon rules, no unary rules at all
/// (every length-1 rhs is a terminal), every nonterminal generating, total
/// rule weight per nonterminal below 1 so fixed points stay finite.
pub fn random_clean_grammar(rng: &mut StdRng) -> RawGrammar {
    let n_nts = rng.gen_range(2..=10);
    let nts: Vec<String> = (0..n_nts).map(|i| format!("N{i}")).collect();
    let n_terms = rng.gen_range(2..=5);
    let terms: Vec<String> = (0..n_terms).map(|i| format!("t{i}")).collect();
    let mut prods: Vec<(String, Vec<String>, f64)> = Vec::new();
    for (i, lhs) in nts.iter().enumerate() {
        let n_rules = rng.gen_range(1..=3);
        let mut budget = 0.95;
        for r in 0..n_rules {
            let w = if r == n_rules - 1 {
                budget
            } else {
                let w = budget * rng.gen_range(0.2..0.7);
                budget -= w;
                w
            };
            // first rule per nonterminal is all-terminal so everything
            // generates; later rules may recurse into earlier nonterminals
            let arity = rng.gen_range(1..=3);
            let rhs: Vec<String> = (0..arity)
                .map(|pos| {
                    let allow_nt = r > 0 && arity > 1 || (r > 0 && pos > 0 && i > 0);
                    if allow_nt && rng.gen_bool(0.45) {
                        nts[rng.gen_range(0..nts.len())].clone()
                    } else {
                        terms[rng.gen_range(0..terms.len())].clone()
                    }
                })
                .collect();
            prods.push((lhs.clone(), rhs, w));
        }
    }
    let raw = RawGrammar { start: "N0".into(), prods };
    dedupe(raw)
}

/// Random grammar with epsilon rules and (sometimes) unary cycles, cycle
/// weight kept well below 1 so every closure converges.
pub fn random_messy_grammar(rng: &mut StdRng) -> RawGrammar {
    let n_nts = rng.gen_range(2..=5);
    let nts: Vec<String> = (0..n_nts).map(|i| format!("M{i}")).collect();
    let terms = ["x", "y"];
    let mut prods: Vec<(String, Vec<String>, f64)> = Vec::new();
    for (i, lhs) in nts.iter().enumerate() {
        // always one terminal rule
        prods.push((
            lhs.clone(),
            vec![terms[rng.gen_range(0..terms.len())].to_string()],
            rng.gen_range(0.1..0.4),
        ));
        if rng.gen_bool(0.6) {
            prods.push((lhs.clone(), vec![], rng.gen_range(0.05..0.3)));
        }
        if rng.gen_bool(0.7) {
            // unary rule; adjacent indices make two-cycles likely
            let j = (i + 1) % n_nts;
            prods.push((lhs.clone(), vec![nts[j].clone()], rng.gen_range(0.1..0.4)));
        }
        if rng.gen_bool(0.7) {
            let j = rng.gen_range(0..n_nts);
            let k = rng.gen_range(0..n_nts);
            prods.push((
                lhs.clone(),
                vec![nts[j].clone(), nts[k].clone()],
                rng.gen_range(0.05..0.25),
            ));
        }
    }
    dedupe(RawGrammar { start: "M0".into(), prods })
}

/// Random tight PCFG: rule weights per nonterminal sum to one and the
/// branching rule is subcritical, so the grammar halts with probability one
/// and sentence weights form a (sub)probability distribution.
pub fn random_tight_pcfg(rng: &mut StdRng) -> RawGrammar {
    let n_nts = rng.gen_range(2..=6);
    let nts: Vec<String> = (0..n_nts).map(|i| format!("P{i}")).collect();
    let terms: Vec<String> = (0..rng.gen_range(2..=4)).map(|i| format!("w{i}")).collect();
    let mut prods: Vec<(String, Vec<String>, f64)> = Vec::new();
    for lhs in &nts {
        let branch = rng.gen_range(0.05..0.4);
        let t1 = (1.0 - branch) * rng.gen_range(0.3..0.7);
        let t2 = 1.0 - branch - t1;
        let a = nts[rng.gen_range(0..n_nts)].clone();
        let b = nts[rng.gen_range(0..n_nts)].clone();
        prods.push((lhs.clone(), vec![a, b], branch));
        prods.push((
            lhs.clone(),
            vec![terms[rng.gen_range(0..terms.len())].clone()],
            t1,
        ));
        prods.push((
            lhs.clone(),
            vec![terms[rng.gen_range(0..terms.len())].clone()],
            t2,
        ));
    }
    dedupe(RawGrammar { start: "P0".into(), prods })
}

fn dedupe(raw: RawGrammar) -> RawGrammar {
    // merge duplicate (lhs, rhs) pairs by adding magnitudes, mirroring the
    // grammar loader, so materializations under non-additive carriers agree
    let mut seen: HashMap<(String, Vec<String>), f64> = HashMap::new();
    let mut order: Vec<(String, Vec<String>)> = Vec::new();
    for (lhs, rhs, p) in raw.prods {
        let key = (lhs, rhs);
        if let Some(slot) = seen.get_mut(&key) {
            *slot += p;
        } else {
            seen.insert(key.clone(), p);
            order.push(key);
        }
    }
    RawGrammar {
        start: raw.start,
        prods: order
            .into_iter()
            .map(|key| {
                let p = seen[&key];
                (key.0, key.1, p)
            })
            .collect(),
    }
}

pub fn seeded_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Bundled benchmark grammar: a small dense recursive core (every pair of
/// core nonterminals linked, so completion work is heavy) plus a large dead
/// lexicon hanging off a predicted-everywhere nonterminal. Exceeds 5,000
/// productions with at least two per nonterminal.
pub fn synthetic_big_grammar() -> RawGrammar {
    let k = 12;
    let lexicon = 4900;
    let mut prods: Vec<(String, Vec<String>, f64)> = Vec::new();
    prods.push(("S".into(), vec!["X0".into()], 0.5));
    prods.push(("S".into(), vec!["a".into(), "X0".into()], 0.5));
    for i in 0..k {
        let lhs = format!("X{i}");
        for j in 0..k {
            prods.push((lhs.clone(), vec!["a".into(), format!("X{j}")], 0.4 / k as f64));
        }
        prods.push((lhs.clone(), vec!["a".into()], 0.3));
        // several distinct dotted positions wanting the lexicon nonterminal:
        // the naive engine re-predicts L's 4,900 rules per wanting item, the
        // indexed engine once per position
        for m in 0..8 {
            prods.push((
                lhs.clone(),
                vec!["a".into(), "L".into(), format!("c{m}")],
                0.3 / 8.0,
            ));
        }
    }
    for i in 0..lexicon {
        prods.push(("L".into(), vec![format!("word{i}")], 1.0 / lexicon as f64));
    }
    RawGrammar { start: "S".into(), prods }
}

/// Bundled prefix-sharing family: many productions with a long common
/// prefix, where the determinized automaton encoding collapses the shared
/// structure that the per-production chart engine re-derives.
pub fn prefix_sharing_grammar() -> RawGrammar {
    let mut prods: Vec<(String, Vec<String>, f64)> = Vec::new();
    let variants = 8;
    for i in 0..variants {
        prods.push(("S".into(), vec![format!("NP{i}"), "v".into()], 1.0));
        for adjs in 1..=4 {
            let mut rhs = vec!["d".to_string()];
            rhs.extend(std::iter::repeat("adj".to_string()).take(adjs));
            rhs.push(format!("n{i}"));
            prods.push((format!("NP{i}"), rhs, 1.0));
        }
    }
    RawGrammar { start: "S".into(), prods }
}

/// Ambiguous grammar whose Comp2 count scales cubically in sentence length.
pub fn ambiguous_scaling_grammar() -> RawGrammar {
    RawGrammar {
        start: "S".into(),
        prods: vec![
            ("S".into(), vec!["S".into(), "S".into()], 0.4),
            ("S".into(), vec!["a".into()], 0.6),
        ],
    }
}

/// Unambiguous grammar whose item count scales quadratically: every prefix
/// of the input supports exactly one active analysis per span.
pub fn unambiguous_scaling_grammar() -> RawGrammar {
    RawGrammar {
        start: "S".into(),
        prods: vec![
            ("S".into(), vec!["a".into(), "S".into(), "a".into()], 0.5),
            ("S".into(), vec!["b".into()], 0.5),
        ],
    }
}
