//! Command-line interface behind the `earley` binary.
//!
//! Subcommands: `preprocess` (grammar transforms, closure tables, WFSA
//! encoding), `recognize` (total weights, optionally prefix weights),
//! `parse` (best derivation under the Viterbi semiring), `prefix`
//! (shorthand for recognize with prefix weights), and `bench` (CSV
//! benchmark harness). Sentences are read one per line from stdin or a
//! file; weights print in shortest exact decimal form.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (syntax, divergent
//! or non-convergent closure, violated engine precondition).

use crate::bench::{run_bench, BenchConfig, Engine};
use crate::earley::{best_derivation, recognize_fast, recognize_naive, EngineOpts, ParseResult};
use crate::earley_fsa::{recognize_fsa, recognize_fsa_binarized};
use crate::grammar::{parse_grammar, Grammar};
use crate::oracle::derivation_sum;
use crate::semiring::{Boolean, LogReal, Real, Semiring, Tropical, Viterbi};
use crate::transform::{preprocess_pipeline, ClosureTables};
use crate::wfsa::{
    build_side_tables, determinize_minimize_boolean, encode_cfg_as_wfsa, parse_wfsa, Wfsa,
};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "earley", version, about = "Semiring-weighted Earley parsing engines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SemiringName {
    Boolean,
    Real,
    Log,
    Tropical,
    Viterbi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineName {
    Earley,
    Fast,
    Fsa,
    FsaBin,
}

#[derive(Args)]
struct CommonInput {
    /// Weighted grammar file (.wcfg)
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Weighted automaton file (.fsa), for the fsa engines
    #[arg(long)]
    wfsa: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "real")]
    semiring: SemiringName,
    /// Append rule-instantiation counts as rule=count pairs
    #[arg(long)]
    stats: bool,
    /// Run the exhaustive-enumeration oracle beside the engine and report
    /// any disagreement (exit 2)
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transform a grammar into engine-ready form
    Preprocess {
        #[command(flatten)]
        common: CommonInput,
        /// Write the transformed grammar here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write closure tables as deterministic text
        #[arg(long)]
        emit_tables: Option<PathBuf>,
        /// Encode the transformed grammar as a weighted automaton
        #[arg(long)]
        to_wfsa: Option<PathBuf>,
        /// Determinize the automaton under the boolean projection
        #[arg(long, requires = "to_wfsa")]
        determinize_boolean: bool,
        /// Minimize the determinized automaton
        #[arg(long, requires = "determinize_boolean")]
        minimize_boolean: bool,
    },
    /// Print the total weight of each input sentence
    Recognize {
        #[command(flatten)]
        common: CommonInput,
        #[arg(long, value_enum, default_value = "fast")]
        engine: EngineName,
        /// Also print prefix weights, tab-separated after the total
        #[arg(long)]
        prefix: bool,
        /// Gate predictions on the next input token
        #[arg(long)]
        lookahead: bool,
        /// Sentence file, one per line (default: stdin)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the best derivation of each sentence as a bracketed tree
    Parse {
        #[command(flatten)]
        common: CommonInput,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print prefix weights for each sentence (recognize --prefix)
    Prefix {
        #[command(flatten)]
        common: CommonInput,
        #[arg(long)]
        lookahead: bool,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run engines over a sentence file and emit benchmark CSV
    Bench {
        #[command(flatten)]
        common: CommonInput,
        /// Sentence file, one per line
        #[arg(long)]
        sentences: PathBuf,
        /// Comma-separated subset of earley,fast,fsa,fsa-bin
        #[arg(long, default_value = "earley,fast")]
        engines: String,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-sentence cutoff in seconds
        #[arg(long, default_value_t = 180.0)]
        time_budget: f64,
        /// Zero the seconds column for deterministic output
        #[arg(long)]
        no_time: bool,
    },
}

pub fn run() -> i32 {
    run_from(std::env::args_os(), None)
}

/// Entry point shared with tests: argv plus optional replacement stdin.
pub fn run_from<I, T>(argv: I, input_override: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match dispatch(cli.cmd, input_override, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn read_sentences(path: &Option<PathBuf>, input_override: Option<&str>) -> Result<Vec<String>> {
    let text = match (path, input_override) {
        (Some(p), _) => std::fs::read_to_string(p)?,
        (None, Some(s)) => s.to_string(),
        (None, None) => {
            let mut buf = String::new();
            for line in std::io::stdin().lock().lines() {
                buf.push_str(&line?);
                buf.push('\n');
            }
            buf
        }
    };
    Ok(text.lines().map(str::to_string).collect())
}

fn grammar_path(common: &CommonInput) -> Result<&Path> {
    common.grammar.as_deref().ok_or_else(|| {
        Error::Precondition("this command requires --grammar <path>".into())
    })
}

fn load_grammar<W: Semiring>(path: &Path) -> Result<Grammar<W>> {
    parse_grammar(&std::fs::read_to_string(path)?)
}

macro_rules! dispatch_semiring {
    ($name:expr, $f:ident ( $($arg:expr),* )) => {
        match $name {
            SemiringName::Boolean => $f::<Boolean>($($arg),*),
            SemiringName::Real => $f::<Real>($($arg),*),
            SemiringName::Log => $f::<LogReal>($($arg),*),
            SemiringName::Tropical => $f::<Tropical>($($arg),*),
            SemiringName::Viterbi => $f::<Viterbi>($($arg),*),
        }
    };
}

fn dispatch(cmd: Cmd, input_override: Option<&str>, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Cmd::Preprocess {
            common,
            out: out_path,
            emit_tables,
            to_wfsa,
            determinize_boolean,
            minimize_boolean: _,
        } => {
            let sem = common.semiring;
            dispatch_semiring!(
                sem,
                cmd_preprocess(
                    &common,
                    out_path.as_deref(),
                    emit_tables.as_deref(),
                    to_wfsa.as_deref(),
                    determinize_boolean,
                    out
                )
            )
        }
        Cmd::Recognize { common, engine, prefix, lookahead, input } => {
            let sentences = read_sentences(&input, input_override)?;
            let sem = common.semiring;
            dispatch_semiring!(
                sem,
                cmd_recognize(&common, engine, prefix, lookahead, &sentences, out)
            )
        }
        Cmd::Prefix { common, lookahead, input } => {
            let sentences = read_sentences(&input, input_override)?;
            let sem = common.semiring;
            dispatch_semiring!(
                sem,
                cmd_recognize(&common, EngineName::Fast, true, lookahead, &sentences, out)
            )
        }
        Cmd::Parse { common, input } => {
            let sentences = read_sentences(&input, input_override)?;
            cmd_parse(&common, &sentences, out)
        }
        Cmd::Bench { common, sentences, engines, repeats, out: out_path, time_budget, no_time } => {
            let lines = std::fs::read_to_string(&sentences)?;
            let sem = common.semiring;
            dispatch_semiring!(
                sem,
                cmd_bench(
                    &common,
                    &lines,
                    &engines,
                    repeats,
                    out_path.as_deref(),
                    time_budget,
                    no_time,
                    out
                )
            )
        }
    }
}

fn cmd_preprocess<W: Semiring>(
    common: &CommonInput,
    out_path: Option<&Path>,
    emit_tables: Option<&Path>,
    to_wfsa: Option<&Path>,
    determinize_boolean: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let g: Grammar<W> = load_grammar(grammar_path(common)?)?;
    let (g2, tables) = preprocess_pipeline(&g)?;
    if common.stats {
        let before = g.size_report();
        let after = g2.size_report();
        eprintln!(
            "productions {} -> {}, nonterminals {} -> {}, size {} -> {}",
            before.productions,
            after.productions,
            before.nonterminals,
            after.nonterminals,
            before.total_size,
            after.total_size
        );
    }
    if let Some(path) = emit_tables {
        std::fs::write(path, serialize_tables(&g2, &tables))?;
    }
    if let Some(path) = to_wfsa {
        let mut m = encode_cfg_as_wfsa(&g2);
        if determinize_boolean {
            m = determinize_minimize_boolean(&m, true)?;
        }
        std::fs::write(path, m.serialize())?;
    }
    match out_path {
        Some(path) => std::fs::write(path, g2.serialize())?,
        None => write!(out, "{}", g2.serialize())?,
    }
    Ok(())
}

/// Closure tables in a stable text form: one `kind symbols… value` line,
/// sorted, with exact shortest-decimal weights.
fn serialize_tables<W: Semiring>(g: &Grammar<W>, t: &ClosureTables<W>) -> String {
    let name = |s| g.symbols.name(s);
    let mut lines = Vec::new();
    for (&a, w) in &t.null_weight {
        lines.push(format!("null {} {}", name(a), w.display_weight()));
    }
    for (&a, w) in &t.free_weight {
        lines.push(format!("free {} {}", name(a), w.display_weight()));
    }
    for (&(a, b), w) in &t.unary_chain {
        lines.push(format!("chain {} {} {}", name(a), name(b), w.display_weight()));
    }
    for (&(a, b), w) in &t.left_corner {
        lines.push(format!("leftcorner {} {} {}", name(a), name(b), w.display_weight()));
    }
    for (&(p, dot), w) in &t.suffix_product {
        lines.push(format!("suffix {p} {dot} {}", w.display_weight()));
    }
    lines.sort();
    let mut out = String::new();
    for line in lines {
        let _ = writeln!(out, "{line}");
    }
    out
}

enum Loaded<W: Semiring> {
    Cfg(Grammar<W>, Option<ClosureTables<W>>),
    Automaton(Box<Wfsa<W>>, Option<Grammar<W>>),
}

fn cmd_recognize<W: Semiring>(
    common: &CommonInput,
    engine: EngineName,
    prefix: bool,
    lookahead: bool,
    sentences: &[String],
    out: &mut dyn Write,
) -> Result<()> {
    if prefix && common.semiring == SemiringName::Viterbi {
        return Err(Error::Precondition(
            "prefix weights require a commutative semiring".into(),
        ));
    }
    if prefix && engine != EngineName::Fast {
        return Err(Error::Precondition(
            "prefix weights are only available with --engine fast".into(),
        ));
    }
    let loaded: Loaded<W> = match engine {
        EngineName::Earley | EngineName::Fast => {
            let g = load_grammar(grammar_path(common)?)?;
            if prefix {
                // prefix mode needs the closure tables; the pipeline is a
                // no-op on an already preprocessed grammar
                let (g2, tables) = preprocess_pipeline(&g)?;
                Loaded::Cfg(g2, Some(tables))
            } else {
                Loaded::Cfg(g, None)
            }
        }
        EngineName::Fsa | EngineName::FsaBin => match (&common.wfsa, &common.grammar) {
            (Some(path), _) => {
                let m = parse_wfsa(&std::fs::read_to_string(path)?)?;
                Loaded::Automaton(Box::new(m), None)
            }
            (None, Some(path)) => {
                let g: Grammar<W> = load_grammar(path)?;
                let (g2, _) = preprocess_pipeline(&g)?;
                let m = encode_cfg_as_wfsa(&g2);
                Loaded::Automaton(Box::new(m), Some(g2))
            }
            (None, None) => {
                return Err(Error::Precondition(
                    "fsa engines require --wfsa or --grammar".into(),
                ))
            }
        },
    };
    let side_tables = match &loaded {
        Loaded::Automaton(m, _) => Some(build_side_tables(m)?),
        Loaded::Cfg(..) => None,
    };
    let opts = EngineOpts { prefix, lookahead };

    let mut disagreements = 0usize;
    for sentence in sentences {
        let toks: Vec<&str> = sentence.split_whitespace().collect();
        let result: ParseResult<W> = match (&loaded, engine) {
            (Loaded::Cfg(g, _), EngineName::Earley) => recognize_naive(g, &toks)?,
            (Loaded::Cfg(g, tables), EngineName::Fast) => {
                recognize_fast(g, tables.as_ref(), &toks, opts.clone())?
            }
            (Loaded::Automaton(m, _), EngineName::Fsa) => {
                recognize_fsa(m, side_tables.as_ref().unwrap(), &toks)?
            }
            (Loaded::Automaton(m, _), EngineName::FsaBin) => {
                recognize_fsa_binarized(m, side_tables.as_ref().unwrap(), &toks)?
            }
            _ => unreachable!(),
        };
        if common.oracle_check {
            let g = match &loaded {
                Loaded::Cfg(g, _) => g,
                Loaded::Automaton(_, Some(g)) => g,
                Loaded::Automaton(_, None) => {
                    return Err(Error::Precondition(
                        "--oracle-check needs a grammar, not a bare automaton".into(),
                    ))
                }
            };
            let want = derivation_sum(g, &toks)?;
            if !want.approx_eq(&result.total, 1e-12, 1e-9) {
                eprintln!(
                    "oracle disagreement on {sentence:?}: engine {} oracle {}",
                    result.total.display_weight(),
                    want.display_weight()
                );
                disagreements += 1;
            }
        }
        write!(out, "{}", result.total.display_weight())?;
        if let Some(pw) = &result.prefix {
            for w in pw {
                write!(out, "\t{}", w.display_weight())?;
            }
        }
        if common.stats {
            for (rule, count) in &result.stats.counts {
                write!(out, "\t{rule}={count}")?;
            }
        }
        writeln!(out)?;
    }
    if disagreements > 0 {
        return Err(Error::Precondition(format!(
            "oracle disagreed on {disagreements} sentence(s)"
        )));
    }
    Ok(())
}

fn cmd_parse(common: &CommonInput, sentences: &[String], out: &mut dyn Write) -> Result<()> {
    if !matches!(common.semiring, SemiringName::Viterbi | SemiringName::Real) {
        return Err(Error::Precondition(
            "parse extracts best derivations; use --semiring viterbi (weights are read on the max-times scale)".into(),
        ));
    }
    let g: Grammar<Viterbi> = load_grammar(grammar_path(common)?)?;
    for sentence in sentences {
        let toks: Vec<&str> = sentence.split_whitespace().collect();
        let result = best_derivation(&g, &toks)?;
        match &result.best_tree {
            Some(tree) => {
                write!(out, "{}\t{}", tree.bracketed(&g), result.total.display_weight())?
            }
            None => write!(out, "NOPARSE")?,
        }
        if common.stats {
            for (rule, count) in &result.stats.counts {
                write!(out, "\t{rule}={count}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench<W: Semiring>(
    common: &CommonInput,
    sentence_text: &str,
    engines: &str,
    repeats: usize,
    out_path: Option<&Path>,
    time_budget: f64,
    no_time: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let path = grammar_path(common)?;
    let g: Grammar<W> = load_grammar(path)?;
    let grammar_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "grammar".into());
    let mut config = BenchConfig::new(&grammar_id, g);
    config.sentences = sentence_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    config.engines = engines
        .split(',')
        .map(|name| {
            Engine::parse(name.trim()).ok_or_else(|| {
                Error::Precondition(format!(
                    "unknown engine {name:?}; expected earley, fast, fsa, or fsa-bin"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    config.repeats = repeats;
    config.time_budget = std::time::Duration::from_secs_f64(time_budget);
    config.measure_time = !no_time;
    let csv = run_bench(&config)?;
    match out_path {
        Some(path) => std::fs::write(path, csv)?,
        None => write!(out, "{csv}")?,
    }
    Ok(())
}
