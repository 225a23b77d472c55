//! One-word lookahead: predictions are gated on whether the predicted
//! nonterminal can start with the next input token. Weights are unchanged;
//! prediction counts drop.

use earley_core::earley::{recognize_fast, EngineOpts};
use earley_core::grammar::{parse_grammar, Grammar};
use earley_core::semiring::Real;

const GRAMMAR: &str = "\
start: S
0.25 S -> NP VP
0.25 S -> AP VP
0.25 S -> PP VP
0.25 S -> n VP
0.5 NP -> det n
0.5 NP -> n n
1.0 AP -> adj n
1.0 PP -> p n
1.0 VP -> v
";

fn main() -> earley_core::Result<()> {
    let g: Grammar<Real> = parse_grammar(GRAMMAR)?;
    let toks = ["det", "n", "v"];
    let plain = recognize_fast(&g, None, &toks, EngineOpts::default())?;
    let gated = recognize_fast(
        &g,
        None,
        &toks,
        EngineOpts { prefix: false, lookahead: true },
    )?;
    assert_eq!(plain.total, gated.total);
    println!("weight {}", plain.total.0);
    for rule in ["pred1", "pred2"] {
        println!(
            "{rule}: {} without lookahead, {} with",
            plain.stats.counts.get(rule).copied().unwrap_or(0),
            gated.stats.counts.get(rule).copied().unwrap_or(0)
        );
    }
    Ok(())
}
