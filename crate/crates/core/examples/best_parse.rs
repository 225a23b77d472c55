//! Extract the highest-weight derivation under the Viterbi semiring and
//! print it as a bracketed tree.

use earley_core::earley::best_derivation;
use earley_core::grammar::{parse_grammar, Grammar};
use earley_core::semiring::{Semiring, Viterbi};

const GRAMMAR: &str = "\
start: S
1.0 S -> NP VP
0.6 NP -> det n
0.4 NP -> n
0.7 VP -> v NP
0.3 VP -> v
";

fn main() -> earley_core::Result<()> {
    let g: Grammar<Viterbi> = parse_grammar(GRAMMAR)?;
    for sentence in ["det n v n", "n v", "det n v det n"] {
        let toks: Vec<&str> = sentence.split_whitespace().collect();
        let r = best_derivation(&g, &toks)?;
        match r.best_tree {
            Some(tree) => println!(
                "{sentence:<16} {} @ {}",
                tree.bracketed(&g),
                r.total.display_weight()
            ),
            None => println!("{sentence:<16} no parse"),
        }
    }
    Ok(())
}
