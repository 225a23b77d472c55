//! Benchmark the naive and indexed chart engines on the bundled synthetic
//! grammar (5,000+ productions) and print the resulting CSV.

use earley_core::bench::{run_bench, BenchConfig, Engine};
use earley_core::gen::synthetic_big_grammar;
use earley_core::grammar::Grammar;
use earley_core::semiring::Real;

fn main() -> earley_core::Result<()> {
    let g: Grammar<Real> = synthetic_big_grammar().materialize();
    let mut config = BenchConfig::new("synthetic", g);
    config.engines = vec![Engine::Earley, Engine::Fast];
    config.sentences = [5usize, 10, 15]
        .iter()
        .map(|&n| vec!["a".to_string(); n])
        .collect();
    config.repeats = 3;
    config.seed = Some(42);
    print!("{}", run_bench(&config)?);
    Ok(())
}
