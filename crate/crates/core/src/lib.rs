//! Semiring-weighted Earley parsing engines and grammar preprocessing.
//!
//! The crate provides three recognition engines over weighted CFGs (a naive
//! Earley deduction system, an indexed fast variant, and an engine over a
//! single-WFSA grammar representation), the grammar transforms they require
//! (nullary elimination, unary-cycle collapse, left-corner closure), prefix
//! weights with left-recursion handled in closed form, and brute-force
//! oracles for testing.
//!
//! Start with the runnable programs in `examples/`; the `earley` binary
//! exposes the same functionality as a CLI.

pub mod bench;
pub mod cli;
pub mod earley;
pub mod earley_fsa;
pub mod error;
pub mod gen;
pub mod grammar;
pub mod graph;
pub mod oracle;
pub mod semiring;
pub mod transform;
pub mod wfsa;

pub use error::{Error, Result};
