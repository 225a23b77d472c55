//! Recognize sentences under a probabilistic grammar with both chart
//! engines and show that their totals agree.

use earley_core::earley::{recognize_fast, recognize_naive, EngineOpts};
use earley_core::grammar::{parse_grammar, Grammar};
use earley_core::semiring::{Real, Semiring};

const GRAMMAR: &str = "\
start: S
1.0 S -> NP VP
0.5 NP -> det n
0.5 NP -> n
1.0 VP -> v NP
";

fn main() -> earley_core::Result<()> {
    let g: Grammar<Real> = parse_grammar(GRAMMAR)?;
    for sentence in ["det n v n", "n v det n", "v v"] {
        let toks: Vec<&str> = sentence.split_whitespace().collect();
        let naive = recognize_naive(&g, &toks)?;
        let fast = recognize_fast(&g, None, &toks, EngineOpts::default())?;
        assert!(naive.total.approx_eq(&fast.total, 1e-12, 1e-9));
        println!(
            "{sentence:<12} weight {:<6} items naive/fast {}/{}",
            fast.total.0, naive.stats.items, fast.stats.items
        );
    }
    Ok(())
}
