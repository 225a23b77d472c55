//! Prefix weights under a left-recursive grammar: the weight of every
//! sentence extending a given prefix, computed in one pass with the left
//! recursion collapsed through the left-corner closure tables.

use earley_core::earley::{recognize_fast, EngineOpts};
use earley_core::grammar::{parse_grammar, Grammar};
use earley_core::semiring::{Real, Semiring};
use earley_core::transform::preprocess_pipeline;

const GRAMMAR: &str = "\
start: S
0.5 S -> S a
0.5 S -> a
";

fn main() -> earley_core::Result<()> {
    let g: Grammar<Real> = parse_grammar(GRAMMAR)?;
    let (g, tables) = preprocess_pipeline(&g)?;
    let toks = vec!["a"; 8];
    let opts = EngineOpts { prefix: true, lookahead: false };
    let r = recognize_fast(&g, Some(&tables), &toks, opts)?;
    println!("sentence weight: {}", r.total.display_weight());
    for (k, w) in r.prefix.unwrap().iter().enumerate() {
        // the prefix a^k has weight 0.5^(k-1): a geometric tail summed in
        // closed form despite the unbounded left recursion
        println!("prefix a^{:<2} {}", k + 1, w.display_weight());
    }
    Ok(())
}
