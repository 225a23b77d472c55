//! Weight algebras the engines and transforms are generic over.
//!
//! Shipped instances:
//! - `Boolean` (or, and) for recognition
//! - `Real` (non-negative reals with +, *) for probabilities
//! - `LogReal` (log-sum-exp, +) for underflow-free probabilities
//! - `Tropical` (min, +) for costs
//! - `Viterbi` (max, * with backpointers) for best-derivation extraction
//!
//! All instances are commutative. `star` solves w* = 1 + w*w where the
//! geometric series converges and reports `Divergent` otherwise.

use crate::error::{Error, Result};
use std::fmt::Debug;

pub trait Semiring: Clone + Debug + PartialEq + Send + Sync + 'static {
    const NAME: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn plus(&self, rhs: &Self) -> Self;
    fn times(&self, rhs: &Self) -> Self;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// w* = 1 ⊕ w ⊗ w*, where defined.
    fn star(&self) -> Result<Self>;

    /// Parses a weight literal from grammar/automaton text.
    fn parse_weight(tok: &str) -> std::result::Result<Self, String>;

    /// Text form used for output and serialization (17 significant digits
    /// on numeric carriers).
    fn display_weight(&self) -> String;

    /// Numeric distance between algebraic contents; drives fixed-point
    /// convergence checks and approximate test comparisons.
    fn distance(&self, other: &Self) -> f64;

    /// Size of the value on a common (probability-like) scale, used only to
    /// detect diverging fixed points.
    fn magnitude(&self) -> f64;

    /// Maps a probability-scale value into this semiring. Used by the random
    /// grammar generators so one structural grammar can be materialized under
    /// every shipped semiring.
    fn from_magnitude(p: f64) -> Self;

    /// Attaches a backpointer token to an axiom weight. Identity for all
    /// semirings except Viterbi.
    fn attach_token(&self, _token: u32) -> Self {
        self.clone()
    }

    fn approx_eq(&self, other: &Self, atol: f64, rtol: f64) -> bool {
        let d = self.distance(other);
        if d.is_nan() {
            return false;
        }
        d <= atol + rtol * self.magnitude().max(other.magnitude()).min(1e300)
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // shortest round-trip form: exact to full double precision, but prints
    // 0.25 rather than 2.5000000000000000e-1
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_f64(tok: &str) -> std::result::Result<f64, String> {
    match tok {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse::<f64>()
            .map_err(|_| format!("not a number: {tok:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Boolean(pub bool);

impl Semiring for Boolean {
    const NAME: &'static str = "boolean";

    fn zero() -> Self {
        Boolean(false)
    }
    fn one() -> Self {
        Boolean(true)
    }
    fn plus(&self, rhs: &Self) -> Self {
        Boolean(self.0 || rhs.0)
    }
    fn times(&self, rhs: &Self) -> Self {
        Boolean(self.0 && rhs.0)
    }
    fn star(&self) -> Result<Self> {
        Ok(Boolean(true))
    }
    fn parse_weight(tok: &str) -> std::result::Result<Self, String> {
        match tok {
            "1" | "1.0" | "true" => Ok(Boolean(true)),
            "0" | "0.0" | "false" => Ok(Boolean(false)),
            _ => Err(format!("boolean weight must be 1 or 0, got {tok:?}")),
        }
    }
    fn display_weight(&self) -> String {
        if self.0 { "1".into() } else { "0".into() }
    }
    fn distance(&self, other: &Self) -> f64 {
        if self.0 == other.0 { 0.0 } else { 1.0 }
    }
    fn magnitude(&self) -> f64 {
        if self.0 { 1.0 } else { 0.0 }
    }
    fn from_magnitude(p: f64) -> Self {
        Boolean(p > 0.0)
    }
}

/// Probability semiring: non-negative reals under (+, *).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Semiring for Real {
    const NAME: &'static str = "real";

    fn zero() -> Self {
        Real(0.0)
    }
    fn one() -> Self {
        Real(1.0)
    }
    fn plus(&self, rhs: &Self) -> Self {
        Real(self.0 + rhs.0)
    }
    fn times(&self, rhs: &Self) -> Self {
        Real(self.0 * rhs.0)
    }
    fn star(&self) -> Result<Self> {
        if self.0 < 1.0 {
            Ok(Real(1.0 / (1.0 - self.0)))
        } else {
            Err(Error::Divergent(format!(
                "star({}) in the probability semiring requires w < 1",
                self.0
            )))
        }
    }
    fn parse_weight(tok: &str) -> std::result::Result<Self, String> {
        let x = parse_f64(tok)?;
        if x < 0.0 || !x.is_finite() {
            return Err(format!("probability weight must be finite and >= 0, got {tok}"));
        }
        Ok(Real(x))
    }
    fn display_weight(&self) -> String {
        fmt_f64(self.0)
    }
    fn distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).abs()
    }
    fn magnitude(&self) -> f64 {
        self.0.abs()
    }
    fn from_magnitude(p: f64) -> Self {
        Real(p)
    }
}

/// Log semiring: values live in log space, plus is log-sum-exp, times is +.
/// Weight literals are log-domain numbers (ln p).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogReal(pub f64);

impl Semiring for LogReal {
    const NAME: &'static str = "log";

    fn zero() -> Self {
        LogReal(f64::NEG_INFINITY)
    }
    fn one() -> Self {
        LogReal(0.0)
    }
    fn plus(&self, rhs: &Self) -> Self {
        let (hi, lo) = if self.0 >= rhs.0 { (self.0, rhs.0) } else { (rhs.0, self.0) };
        if hi == f64::NEG_INFINITY {
            return LogReal(f64::NEG_INFINITY);
        }
        LogReal(hi + (lo - hi).exp().ln_1p())
    }
    fn times(&self, rhs: &Self) -> Self {
        LogReal(self.0 + rhs.0)
    }
    fn star(&self) -> Result<Self> {
        if self.0 < 0.0 {
            // ln(1/(1-e^w)) computed stably
            Ok(LogReal(-(-self.0.exp()).ln_1p()))
        } else {
            Err(Error::Divergent(format!(
                "star({}) in the log semiring requires w < 0",
                self.0
            )))
        }
    }
    fn parse_weight(tok: &str) -> std::result::Result<Self, String> {
        let x = parse_f64(tok)?;
        if x == f64::INFINITY {
            return Err("log weight must be < inf".into());
        }
        Ok(LogReal(x))
    }
    fn display_weight(&self) -> String {
        fmt_f64(self.0)
    }
    fn distance(&self, other: &Self) -> f64 {
        if self.0 == other.0 {
            0.0 // covers -inf == -inf
        } else {
            (self.0 - other.0).abs()
        }
    }
    fn magnitude(&self) -> f64 {
        if self.0 > 700.0 { f64::INFINITY } else { self.0.exp() }
    }
    fn from_magnitude(p: f64) -> Self {
        LogReal(p.ln())
    }
}

/// Tropical semiring: (min, +) over costs, with +inf as zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tropical(pub f64);

impl Semiring for Tropical {
    const NAME: &'static str = "tropical";

    fn zero() -> Self {
        Tropical(f64::INFINITY)
    }
    fn one() -> Self {
        Tropical(0.0)
    }
    fn plus(&self, rhs: &Self) -> Self {
        Tropical(self.0.min(rhs.0))
    }
    fn times(&self, rhs: &Self) -> Self {
        Tropical(self.0 + rhs.0)
    }
    fn star(&self) -> Result<Self> {
        if self.0 >= 0.0 {
            Ok(Tropical(0.0))
        } else {
            Err(Error::Divergent(format!(
                "star({}) in the tropical semiring requires w >= 0",
                self.0
            )))
        }
    }
    fn parse_weight(tok: &str) -> std::result::Result<Self, String> {
        let x = parse_f64(tok)?;
        if x == f64::NEG_INFINITY {
            return Err("tropical weight must be > -inf".into());
        }
        Ok(Tropical(x))
    }
    fn display_weight(&self) -> String {
        fmt_f64(self.0)
    }
    fn distance(&self, other: &Self) -> f64 {
        if self.0 == other.0 {
            0.0
        } else {
            (self.0 - other.0).abs()
        }
    }
    fn magnitude(&self) -> f64 {
        if self.0 < -700.0 { f64::INFINITY } else { (-self.0).exp() }
    }
    fn from_magnitude(p: f64) -> Self {
        // Quantized to quarter-integers so that sums are exact in f64.
        Tropical((-p.log2() * 4.0).round() / 4.0)
    }
}

/// Viterbi semiring: max-times over probabilities, carrying the backpointer
/// sequence (production ids of the best derivation, in preorder).
///
/// `plus` selects the heavier argument; ties break toward the
/// lexicographically smaller backpointer sequence for determinism.
#[derive(Clone, Debug, PartialEq)]
pub struct Viterbi {
    pub weight: f64,
    pub path: Vec<u32>,
}

impl Viterbi {
    pub fn from_weight(w: f64) -> Self {
        Viterbi { weight: w, path: Vec::new() }
    }
}

impl Semiring for Viterbi {
    const NAME: &'static str = "viterbi";

    fn zero() -> Self {
        Viterbi::from_weight(0.0)
    }
    fn one() -> Self {
        Viterbi::from_weight(1.0)
    }
    fn plus(&self, rhs: &Self) -> Self {
        if self.weight > rhs.weight
            || (self.weight == rhs.weight && self.path <= rhs.path)
        {
            self.clone()
        } else {
            rhs.clone()
        }
    }
    fn times(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        let mut path = self.path.clone();
        path.extend_from_slice(&rhs.path);
        Viterbi { weight: self.weight * rhs.weight, path }
    }
    fn is_zero(&self) -> bool {
        self.weight == 0.0
    }
    fn star(&self) -> Result<Self> {
        // sup over k of w^k: equals 1 whenever w <= 1 (backpointer empty,
        // the zero-traversal term wins or ties toward the empty path).
        if self.weight <= 1.0 {
            Ok(Self::one())
        } else {
            Err(Error::Divergent(format!(
                "star({}) in the Viterbi semiring requires w <= 1",
                self.weight
            )))
        }
    }
    fn parse_weight(tok: &str) -> std::result::Result<Self, String> {
        let x = parse_f64(tok)?;
        if x < 0.0 || !x.is_finite() {
            return Err(format!("viterbi weight must be finite and >= 0, got {tok}"));
        }
        Ok(Viterbi::from_weight(x))
    }
    fn display_weight(&self) -> String {
        fmt_f64(self.weight)
    }
    fn distance(&self, other: &Self) -> f64 {
        (self.weight - other.weight).abs()
    }
    fn magnitude(&self) -> f64 {
        self.weight
    }
    fn from_magnitude(p: f64) -> Self {
        Viterbi::from_weight(p)
    }
    fn attach_token(&self, token: u32) -> Self {
        Viterbi { weight: self.weight, path: vec![token] }
    }
}
