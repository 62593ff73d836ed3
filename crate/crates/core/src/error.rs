//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{n} is not squarefree ({p}^2 divides it)")]
    NotSquarefree { n: u64, p: u64 },

    #[error("{a} is not invertible modulo {modulus}")]
    NonInvertible { a: u64, modulus: u64 },

    #[error("moduli {a} and {b} are not coprime")]
    NonCoprimeModuli { a: u64, b: u64 },

    #[error("{a} is not coprime to {r}")]
    NonCoprime { a: u64, r: u64 },

    #[error("offset set covers every residue class modulo a prime of q; the expansion denominators vanish")]
    ZeroDensity,

    #[error("no tuple starts exist for this modulus and offset set")]
    EmptySet,

    #[error("modulus must be odd here; every residue is a square modulo 2")]
    EvenModulus,

    #[error("need {needed} primes in the range, found {found}")]
    InsufficientPrimes { needed: usize, found: usize },

    #[error("{what}: needs {required}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("offsets must be strictly increasing and nonempty")]
    BadOffsets,

    #[error("malformed input: {0}")]
    Parse(String),
}
