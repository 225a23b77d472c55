//! Benchmark harness: runs a set of engines over a sentence file and emits
//! CSV rows of wall time, item counts, and per-rule instantiation counts.
//!
//! Wall time is measured around the recognize call only; grammar loading and
//! preprocessing are excluded. With timing disabled the seconds column is
//! zeroed, which makes the CSV deterministic and suitable for golden tests
//! on counts.

use crate::earley::{recognize_fast, recognize_naive, EngineOpts, ParseResult};
use crate::earley_fsa::{recognize_fsa, recognize_fsa_binarized};
use crate::grammar::Grammar;
use crate::semiring::Semiring;
use crate::transform::ClosureTables;
use crate::wfsa::{build_side_tables, encode_cfg_as_wfsa, SideTables, Wfsa};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Earley,
    Fast,
    Fsa,
    FsaBin,
}

impl Engine {
    pub fn parse(name: &str) -> Option<Engine> {
        match name {
            "earley" => Some(Engine::Earley),
            "fast" => Some(Engine::Fast),
            "fsa" => Some(Engine::Fsa),
            "fsa-bin" => Some(Engine::FsaBin),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Earley => "earley",
            Engine::Fast => "fast",
            Engine::Fsa => "fsa",
            Engine::FsaBin => "fsa-bin",
        }
    }
}

pub struct BenchConfig<W: Semiring> {
    pub grammar_id: String,
    pub grammar: Grammar<W>,
    /// Closure tables, when already computed; only needed for prefix mode.
    pub tables: Option<ClosureTables<W>>,
    /// Automaton for the FSA engines; encoded from the grammar when absent.
    pub wfsa: Option<Wfsa<W>>,
    pub sentences: Vec<Vec<String>>,
    pub engines: Vec<Engine>,
    pub repeats: usize,
    /// Per-sentence cutoff; a sentence whose first run exceeds it is
    /// reported as a comment instead of a row.
    pub time_budget: Duration,
    /// When false the seconds column is zeroed.
    pub measure_time: bool,
    /// Recorded in the header comment for reproducibility.
    pub seed: Option<u64>,
}

impl<W: Semiring> BenchConfig<W> {
    pub fn new(grammar_id: &str, grammar: Grammar<W>) -> Self {
        BenchConfig {
            grammar_id: grammar_id.to_string(),
            grammar,
            tables: None,
            wfsa: None,
            sentences: Vec::new(),
            engines: vec![Engine::Earley, Engine::Fast],
            repeats: 1,
            time_budget: Duration::from_secs(180),
            measure_time: true,
            seed: None,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn run_bench<W: Semiring>(config: &BenchConfig<W>) -> Result<String> {
    let needs_fsa = config
        .engines
        .iter()
        .any(|e| matches!(e, Engine::Fsa | Engine::FsaBin));
    let encoded;
    let fsa_pair: Option<(&Wfsa<W>, SideTables<W>)> = if needs_fsa {
        let m = match &config.wfsa {
            Some(m) => m,
            None => {
                encoded = encode_cfg_as_wfsa(&config.grammar);
                &encoded
            }
        };
        Some((m, build_side_tables(m)?))
    } else {
        None
    };

    let mut out = String::new();
    if let Some(seed) = config.seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    out.push_str("grammar,engine,length,seconds,items,<rule>=count...\n");

    for engine in &config.engines {
        for sentence in &config.sentences {
            let toks: Vec<&str> = sentence.iter().map(String::as_str).collect();
            let mut times = Vec::with_capacity(config.repeats.max(1));
            let mut last: Option<ParseResult<W>> = None;
            let mut over_budget = false;
            for _ in 0..config.repeats.max(1) {
                let started = Instant::now();
                let result = run_engine(config, fsa_pair.as_ref(), *engine, &toks)?;
                let elapsed = started.elapsed();
                times.push(elapsed.as_secs_f64());
                last = Some(result);
                if elapsed > config.time_budget {
                    over_budget = true;
                    break;
                }
            }
            if over_budget {
                let _ = writeln!(
                    out,
                    "# time budget exceeded: grammar={} engine={} length={}",
                    config.grammar_id,
                    engine.name(),
                    toks.len()
                );
                continue;
            }
            let result = last.unwrap();
            let seconds = if config.measure_time { median(times) } else { 0.0 };
            let _ = write!(
                out,
                "{},{},{},{seconds},{}",
                config.grammar_id,
                engine.name(),
                toks.len(),
                result.stats.items
            );
            for (rule, count) in &result.stats.counts {
                let _ = write!(out, ",{rule}={count}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn run_engine<W: Semiring>(
    config: &BenchConfig<W>,
    fsa: Option<&(&Wfsa<W>, SideTables<W>)>,
    engine: Engine,
    toks: &[&str],
) -> Result<ParseResult<W>> {
    match engine {
        Engine::Earley => recognize_naive(&config.grammar, toks),
        Engine::Fast => recognize_fast(
            &config.grammar,
            config.tables.as_ref(),
            toks,
            EngineOpts::default(),
        ),
        Engine::Fsa | Engine::FsaBin => {
            let (m, tables) = fsa.ok_or_else(|| {
                Error::Precondition("fsa engine requested without an automaton".into())
            })?;
            if engine == Engine::Fsa {
                recognize_fsa(m, tables, toks)
            } else {
                recognize_fsa_binarized(m, tables, toks)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::semiring::Real;

    const G1: &str = "start: S\n\
        1.0 S -> NP VP\n\
        0.5 NP -> det n\n\
        0.5 NP -> n\n\
        1.0 VP -> v NP\n";

    fn sentences() -> Vec<Vec<String>> {
        vec![
            "det n v n".split(' ').map(String::from).collect(),
            "n v det n".split(' ').map(String::from).collect(),
        ]
    }

    #[test]
    fn empty_sentence_file_yields_header_only() {
        let g: Grammar<Real> = parse_grammar(G1).unwrap();
        let config = BenchConfig::new("g1", g);
        let csv = run_bench(&config).unwrap();
        assert_eq!(csv, "grammar,engine,length,seconds,items,<rule>=count...\n");
    }

    #[test]
    fn deterministic_counts_with_time_zeroed() {
        let g: Grammar<Real> = parse_grammar(G1).unwrap();
        let mut config = BenchConfig::new("g1", g);
        config.sentences = sentences();
        config.engines = vec![Engine::Earley, Engine::Fast, Engine::Fsa, Engine::FsaBin];
        config.measure_time = false;
        config.seed = Some(42);
        let a = run_bench(&config).unwrap();
        let b = run_bench(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("# seed=42\n"));
        // header + 4 engines x 2 sentences
        assert_eq!(a.lines().count(), 2 + 8);
        for row in a.lines().skip(2) {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields[0], "g1");
            assert_eq!(fields[2], "4");
            assert_eq!(fields[3], "0");
            assert!(fields[4].parse::<u64>().unwrap() > 0);
            assert!(fields[5..].iter().all(|f| f.contains('=')));
        }
    }

    #[test]
    fn tiny_budget_reports_cutoff_comment() {
        let g: Grammar<Real> = parse_grammar(G1).unwrap();
        let mut config = BenchConfig::new("g1", g);
        config.sentences = sentences();
        config.time_budget = Duration::from_nanos(1);
        let csv = run_bench(&config).unwrap();
        assert!(csv.contains("# time budget exceeded: grammar=g1 engine=earley length=4"));
    }

    #[test]
    fn unknown_engine_name_rejected() {
        assert!(Engine::parse("fastest").is_none());
        assert_eq!(Engine::parse("fsa-bin"), Some(Engine::FsaBin));
    }
}
