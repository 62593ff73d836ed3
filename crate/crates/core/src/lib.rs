//! Statistics of s-tuples of reduced residues modulo a squarefree number.
//!
//! For a squarefree modulus `q` and an offset set `D = {h_1 < … < h_s}`, the
//! integers `n` with `gcd(n + h_i, q) = 1` for every `i` form a periodic set
//! with exactly `φ_D(q) = ∏_{p|q} (p − ν_p(D))` elements per period. This
//! crate computes their window counts, central moments, gap statistics and
//! the exponential-sum identities that govern them — exactly (big rationals)
//! on the sieve side, and in compensated floating point on the character-sum
//! side, so that the two routes can be checked against each other.
//!
//! Module map:
//! * [`arith`] — factorization, multiplicative functions, CRT, prime sieves
//! * [`tuples`] — offset sets, densities, singular series, the tuple-start sieve
//! * [`identities`] — `E_h`, the `F` envelope, Ramanujan-style expansions, `μ_D(a, r)`
//! * [`moments`] — exact window moments, binomial moments, bound evaluators
//! * [`gaps`] — cyclic gap sequences, `V_λ`, the tail count `L(x)`
//! * [`special_sets`] — squares mod q, general per-prime class systems, Weyl constants
//! * [`sweeps`] — parameter sweeps whose extremal ratios become regression pins
//! * [`pins`] — the pin manifest format shared by sweeps and the CLI

pub mod arith;
pub mod error;
pub mod gaps;
pub mod identities;
pub mod moments;
pub mod pins;
pub mod special_sets;
pub mod sweeps;
pub mod tuples;

pub use arith::SquarefreeModulus;
pub use error::{Error, Result};
pub use tuples::{OffsetSet, SieveBudget, TupleDensity, TupleStartSieve};

/// Exact rational with arbitrary-precision parts. Every density and every
/// moment on the sieve side of the crate is one of these.
pub type Rational = num_rational::BigRational;

/// Lossless `f64` reading of a [`Rational`], scaling down oversized parts first.
pub fn rational_to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Fallback for parts outside f64 range: strip a common power of two.
    let numer_bits = x.numer().bits() as i64;
    let denom_bits = x.denom().bits() as i64;
    let shift = (numer_bits.max(denom_bits) - 900).max(0) as u64;
    let n = x.numer() >> shift;
    let d = x.denom() >> shift;
    match (n.to_f64(), d.to_f64()) {
        (Some(nf), Some(df)) if df != 0.0 => nf / df,
        _ => f64::NAN,
    }
}

/// `x^k` for rationals, with `x^0 = 1`.
pub fn rational_pow(x: &Rational, k: u32) -> Rational {
    Rational::new(x.numer().pow(k), x.denom().pow(k))
}
