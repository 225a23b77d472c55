//! Run the automaton-based engine: encode a grammar as a single weighted
//! FSA, optionally determinize its boolean projection, and recognize with
//! the unbinarized and binarized rule sets. On grammars whose productions
//! share long prefixes, the determinized automaton does strictly less work
//! than the per-production chart engine.

use earley_core::earley::{recognize_fast, EngineOpts};
use earley_core::earley_fsa::{recognize_fsa, recognize_fsa_binarized};
use earley_core::gen::prefix_sharing_grammar;
use earley_core::grammar::Grammar;
use earley_core::semiring::Boolean;
use earley_core::wfsa::{build_side_tables, determinize_minimize_boolean, encode_cfg_as_wfsa};

fn main() -> earley_core::Result<()> {
    let g: Grammar<Boolean> = prefix_sharing_grammar().materialize();
    let encoded = encode_cfg_as_wfsa(&g);
    let minimal = determinize_minimize_boolean(&encoded, true)?;
    println!(
        "states: encoded {} -> minimal {}",
        encoded.n_states, minimal.n_states
    );
    let tables = build_side_tables(&minimal)?;
    let toks = ["d", "adj", "adj", "adj", "n5", "v"];
    let fast = recognize_fast(&g, None, &toks, EngineOpts::default())?;
    let fsa = recognize_fsa(&minimal, &tables, &toks)?;
    let bin = recognize_fsa_binarized(&minimal, &tables, &toks)?;
    assert_eq!(fast.total, fsa.total);
    assert_eq!(fast.total, bin.total);
    println!("accepted: {}", fsa.total.0);
    println!(
        "items: chart {} automaton {} (binarized {})",
        fast.stats.items, fsa.stats.items, bin.stats.items
    );
    Ok(())
}
