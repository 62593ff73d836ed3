//! Admissible offset sets, their per-prime profiles and densities, and the
//! bit sieve of tuple starts over one full period.

use crate::arith::{self, SquarefreeModulus};
use crate::error::{Error, Result};
use crate::{rational_pow, Rational};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// An offset set `D = {h_1 < h_2 < … < h_s}`. Offsets may be negative; the
/// sieve reduces them modulo q.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct OffsetSet {
    offsets: Vec<i64>,
}

impl OffsetSet {
    pub fn new(offsets: Vec<i64>) -> Result<Self> {
        if offsets.is_empty() || offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadOffsets);
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    /// s, the number of offsets.
    pub fn s(&self) -> u32 {
        self.offsets.len() as u32
    }

    /// `h_s − h_1`; zero exactly when s = 1.
    pub fn span(&self) -> i64 {
        self.offsets[self.offsets.len() - 1] - self.offsets[0]
    }

    /// Distinct residues of D modulo p, sorted. Its length is ν_p(D).
    pub fn residues_mod(&self, p: u64) -> Vec<u64> {
        let mut r: Vec<u64> = self
            .offsets
            .iter()
            .map(|&h| h.rem_euclid(p as i64) as u64)
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    }
}

impl TryFrom<Vec<i64>> for OffsetSet {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OffsetSet> for Vec<i64> {
    fn from(d: OffsetSet) -> Self {
        d.offsets
    }
}

impl FromStr for OffsetSet {
    type Err = Error;

    /// Parses a comma-separated integer list, e.g. `0,2,6`.
    fn from_str(s: &str) -> Result<Self> {
        let offsets = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("offset {t:?}: {e}")))
            })
            .collect::<Result<Vec<i64>>>()?;
        Self::new(offsets)
    }
}

impl std::fmt::Display for OffsetSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.offsets.iter().map(|h| h.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// ν_p(D): the number of distinct residues of D modulo p.
pub fn nu_p(d: &OffsetSet, p: u64) -> u64 {
    d.residues_mod(p).len() as u64
}

/// Admissibility against every prime: ν_p(D) < p for all p. Only primes
/// p ≤ s can fail, since ν_p(D) ≤ s.
pub fn is_admissible(d: &OffsetSet) -> bool {
    arith::primes_up_to(d.s() as u64)
        .iter()
        .all(|&p| nu_p(d, p) < p)
}

/// Admissibility restricted to the primes of q.
pub fn is_admissible_mod(d: &OffsetSet, q: &SquarefreeModulus) -> bool {
    q.primes().iter().all(|&p| nu_p(d, p) < p)
}

/// The exact densities attached to a pair (q, D).
#[derive(Debug, Clone, PartialEq)]
pub struct TupleDensity {
    /// `φ_D(q) = ∏_{p|q} (p − ν_p(D))`; the count of tuple starts per period.
    pub phi_d: u64,
    /// `P_D = φ_D(q)/q = ∏ (1 − ν_p(D)/p)`.
    pub p_d: Rational,
    /// Singular series `𝔖_q(D) = ∏ (1 − 1/p)^{−s} (1 − ν_p(D)/p)`.
    pub singular: Rational,
    /// `P^s`.
    pub p_pow_s: Rational,
}

/// Computes `φ_D`, `P_D`, `𝔖_q(D)` and `P^s` exactly. A non-admissible D
/// yields zeros rather than an error, so sweeps can cover arbitrary sets.
pub fn density(q: &SquarefreeModulus, d: &OffsetSet) -> TupleDensity {
    let mut phi_d = 1u64;
    for &p in q.primes() {
        phi_d *= p - nu_p(d, p);
    }
    let p_d = Rational::new(BigInt::from(phi_d), BigInt::from(q.q()));
    let p_pow_s = rational_pow(&q.p_ratio(), d.s());
    let singular = if p_pow_s.is_zero() {
        Rational::zero()
    } else {
        &p_d / &p_pow_s
    };
    TupleDensity {
        phi_d,
        p_d,
        singular,
        p_pow_s,
    }
}

/// Memory cap for sieve construction, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveBudget {
    pub max_bits: u64,
}

impl Default for SieveBudget {
    fn default() -> Self {
        // Primorial 13# = 30030 and moduli up to ~10^9 must fit on a desktop.
        SieveBudget { max_bits: 1 << 31 }
    }
}

/// One period of the indicator `t(n) = ∏_i k_q(n + h_i)`, packed into 64-bit
/// words. Immutable after construction and safely shareable across threads.
#[derive(Debug, Clone)]
pub struct TupleStartSieve {
    q: u64,
    words: Vec<u64>,
    popcount: u64,
}

impl TupleStartSieve {
    /// Sieve of n ∈ [0, q) with `gcd(n + h_i, q) = 1` for every offset.
    pub fn tuple_starts(
        q: &SquarefreeModulus,
        d: &OffsetSet,
        budget: &SieveBudget,
    ) -> Result<Self> {
        let forbidden: Vec<Vec<u64>> = q
            .primes()
            .iter()
            .map(|&p| {
                // n + h ≡ 0 (mod p) exactly when n ≡ −h (mod p).
                let mut cls: Vec<u64> = d
                    .offsets()
                    .iter()
                    .map(|&h| (-h).rem_euclid(p as i64) as u64)
                    .collect();
                cls.sort_unstable();
                cls.dedup();
                cls
            })
            .collect();
        Self::avoiding_classes(q, &forbidden, budget)
    }

    /// Sieve of n ∈ [0, q) avoiding, for each prime of q, every class in the
    /// corresponding forbidden set. `forbidden[i]` pairs with `q.primes()[i]`.
    pub fn avoiding_classes(
        q: &SquarefreeModulus,
        forbidden: &[Vec<u64>],
        budget: &SieveBudget,
    ) -> Result<Self> {
        assert_eq!(forbidden.len(), q.primes().len());
        let qv = q.q();
        if qv > budget.max_bits {
            return Err(Error::BudgetExceeded {
                what: "sieve bits",
                required: qv as u128,
                budget: budget.max_bits as u128,
            });
        }
        let nwords = (qv as usize).div_ceil(64);
        let mut words = vec![u64::MAX; nwords];
        // Mask off bits at and beyond q in the last word.
        let tail = (qv % 64) as u32;
        if tail != 0 {
            words[nwords - 1] = (1u64 << tail) - 1;
        }
        for (&p, cls) in q.primes().iter().zip(forbidden) {
            for &c in cls {
                debug_assert!(c < p);
                let mut n = c;
                while n < qv {
                    words[(n / 64) as usize] &= !(1u64 << (n % 64));
                    n += p;
                }
            }
        }
        let popcount = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(Self {
            q: qv,
            words,
            popcount,
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Number of set bits; equals `φ_D(q)` for a tuple-start sieve.
    pub fn popcount(&self) -> u64 {
        self.popcount
    }

    /// Backing words; ⌈q/64⌉ of them, the whole memory footprint.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, n: u64) -> bool {
        let n = n % self.q;
        self.words[(n / 64) as usize] >> (n % 64) & 1 == 1
    }

    /// Positions of the set bits, ascending.
    pub fn positions(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.popcount as usize);
        for (i, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as u64;
                out.push(i as u64 * 64 + b);
                w &= w - 1;
            }
        }
        out
    }

    /// Cyclic window counts `W(n) = Σ_{m=1}^{h} t((n + m) mod q)` for all n,
    /// by an O(q) sliding window. Satisfies `Σ_n W(n) = h · popcount` exactly.
    pub fn window_counts(&self, h: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.q as usize);
        self.for_each_window(h, |_, w| out.push(w));
        out
    }

    /// Histogram of window counts: `counts[w] = #{n : W(n) = w}`.
    pub fn window_histogram(&self, h: u64) -> Vec<u64> {
        let laps = h / self.q;
        let rem = h % self.q;
        let base = laps * self.popcount;
        let maxw = base + rem.min(self.popcount);
        let mut counts = vec![0u64; (maxw + 1) as usize];
        self.for_each_window(h, |_, w| counts[w as usize] += 1);
        counts
    }

    /// Drives `f(n, W(n))` over n = 0..q in order. Windows longer than a full
    /// period contribute `⌊h/q⌋ · popcount` plus a sliding remainder window.
    pub fn for_each_window<F: FnMut(u64, u64)>(&self, h: u64, mut f: F) {
        assert!(h >= 1);
        let q = self.q;
        let laps = h / q;
        let rem = h % q;
        let base = laps * self.popcount;
        let mut w = 0u64;
        for m in 1..=rem {
            w += self.bit(m % q) as u64;
        }
        f(0, base + w);
        for n in 0..q - 1 {
            w += self.bit((n + 1 + rem) % q) as u64;
            w -= self.bit(n + 1) as u64;
            f(n + 1, base + w);
        }
    }
}

/// Spec-level alias for [`TupleStartSieve::tuple_starts`].
pub fn sieve_tuple_starts(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    budget: &SieveBudget,
) -> Result<TupleStartSieve> {
    TupleStartSieve::tuple_starts(q, d, budget)
}

/// Spec-level alias for [`TupleStartSieve::window_counts`].
pub fn window_counts(sieve: &TupleStartSieve, h: u64) -> Vec<u64> {
    sieve.window_counts(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factor_squarefree;
    use num_traits::One;
    use proptest::prelude::*;

    fn d(list: &[i64]) -> OffsetSet {
        OffsetSet::new(list.to_vec()).unwrap()
    }

    #[test]
    fn nu_p_examples() {
        assert_eq!(nu_p(&d(&[0, 2]), 2), 1);
        assert_eq!(nu_p(&d(&[0, 2, 6]), 3), 2);
        assert_eq!(nu_p(&d(&[0]), 97), 1);
    }

    #[test]
    fn admissibility_examples() {
        assert!(!is_admissible(&d(&[0, 1])));
        assert!(is_admissible(&d(&[0, 2])));
        assert!(!is_admissible(&d(&[0, 2, 4])));
        assert!(is_admissible(&d(&[0, 2, 6])));
        let q15 = factor_squarefree(15).unwrap();
        assert!(is_admissible_mod(&d(&[0, 1]), &q15)); // 2 ∤ 15
    }

    #[test]
    fn density_examples() {
        let q15 = factor_squarefree(15).unwrap();
        let t = density(&q15, &d(&[0, 2]));
        assert_eq!(t.phi_d, 3);
        assert_eq!(t.singular, Rational::new(45.into(), 64.into()));
        assert_eq!(t.p_d, &t.singular * &t.p_pow_s);

        let t1 = density(&q15, &d(&[0]));
        assert!(t1.singular.is_one());

        let q3 = factor_squarefree(3).unwrap();
        let t0 = density(&q3, &d(&[0, 1, 2]));
        assert_eq!(t0.phi_d, 0);
        assert!(t0.singular.is_zero());
    }

    #[test]
    fn sieve_examples() {
        let budget = SieveBudget::default();
        let q15 = factor_squarefree(15).unwrap();
        let s = TupleStartSieve::tuple_starts(&q15, &d(&[0]), &budget).unwrap();
        assert_eq!(s.positions(), vec![1, 2, 4, 7, 8, 11, 13, 14]);

        let s2 = TupleStartSieve::tuple_starts(&q15, &d(&[0, 2]), &budget).unwrap();
        assert_eq!(s2.popcount(), 3);

        let q1 = factor_squarefree(1).unwrap();
        let s1 = TupleStartSieve::tuple_starts(&q1, &d(&[-5, 0, 3]), &budget).unwrap();
        assert_eq!(s1.popcount(), 1);
        assert_eq!(s1.positions(), vec![0]);
    }

    #[test]
    fn sieve_matches_gcd_enumeration() {
        let budget = SieveBudget::default();
        let sets = [
            d(&[0]),
            d(&[0, 2]),
            d(&[0, 2, 6]),
            d(&[-3, 0, 4]),
            d(&[0, 1]),
        ];
        for n in 1u64..=500 {
            let Ok(q) = factor_squarefree(n) else {
                continue;
            };
            for ds in &sets {
                let s = TupleStartSieve::tuple_starts(&q, ds, &budget).unwrap();
                let mut count = 0u64;
                for x in 0..n {
                    let all = ds
                        .offsets()
                        .iter()
                        .all(|&h| arith::gcd((x as i64 + h).rem_euclid(n as i64) as u64, n) == 1);
                    assert_eq!(s.bit(x), all, "q = {n}, D = {ds}, n = {x}");
                    count += all as u64;
                }
                assert_eq!(s.popcount(), count);
                assert_eq!(count, density(&q, ds).phi_d);
            }
        }
    }

    #[test]
    fn popcount_matches_density_formula_to_1e4() {
        let budget = SieveBudget::default();
        let sets = [
            d(&[0]),
            d(&[0, 2]),
            d(&[0, 2, 6]),
            d(&[-3, 0, 4]),
            d(&[0, 1]),
        ];
        for n in 1u64..=10_000 {
            let Ok(q) = factor_squarefree(n) else {
                continue;
            };
            for ds in &sets {
                let s = TupleStartSieve::tuple_starts(&q, ds, &budget).unwrap();
                assert_eq!(s.popcount(), density(&q, ds).phi_d, "q = {n}, D = {ds}");
            }
        }
    }

    #[test]
    fn window_count_examples() {
        let budget = SieveBudget::default();
        let q3 = factor_squarefree(3).unwrap();
        let s = TupleStartSieve::tuple_starts(&q3, &d(&[0]), &budget).unwrap();
        assert_eq!(s.window_counts(1), vec![1, 1, 0]);

        let q15 = factor_squarefree(15).unwrap();
        let s = TupleStartSieve::tuple_starts(&q15, &d(&[0, 2]), &budget).unwrap();
        let w = s.window_counts(4);
        assert_eq!(w.iter().sum::<u64>(), 4 * 3);
        assert_eq!(s.window_counts(15), vec![3; 15]);
        // One full lap plus a remainder window.
        let w20 = s.window_counts(20);
        let w5 = s.window_counts(5);
        assert!(w20.iter().zip(&w5).all(|(a, b)| *a == b + 3));
    }

    #[test]
    fn histogram_agrees_with_counts() {
        let budget = SieveBudget::default();
        let q = factor_squarefree(210).unwrap();
        let s = TupleStartSieve::tuple_starts(&q, &d(&[0, 2, 6]), &budget).unwrap();
        for h in [1, 2, 7, 50, 209, 210, 211, 500] {
            let counts = s.window_counts(h);
            let hist = s.window_histogram(h);
            let mut expect = vec![0u64; hist.len()];
            for &w in &counts {
                expect[w as usize] += 1;
            }
            assert_eq!(hist, expect, "h = {h}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let q = factor_squarefree(30030).unwrap();
        let err = TupleStartSieve::tuple_starts(&q, &d(&[0]), &SieveBudget { max_bits: 1024 });
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn offset_parsing() {
        let p: OffsetSet = "0, 2,6".parse().unwrap();
        assert_eq!(p, d(&[0, 2, 6]));
        assert!("3,1".parse::<OffsetSet>().is_err());
        assert!("".parse::<OffsetSet>().is_err());
        let j: OffsetSet = serde_json::from_str("[-4,0,2]").unwrap();
        assert_eq!(j, d(&[-4, 0, 2]));
        assert!(serde_json::from_str::<OffsetSet>("[2,2]").is_err());
    }

    proptest! {
        #[test]
        fn window_sum_identity(qi in 2u64..1500, mask in 0u8..32, h in 1u64..300) {
            let q = crate::arith::radical(qi);
            let mut offs: Vec<i64> = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| i as i64 * 2).collect();
            if offs.is_empty() { offs.push(0); }
            let ds = OffsetSet::new(offs).unwrap();
            let s = TupleStartSieve::tuple_starts(&q, &ds, &SieveBudget::default()).unwrap();
            let w = s.window_counts(h);
            prop_assert_eq!(w.iter().sum::<u64>(), h * s.popcount());
            prop_assert!(w.iter().all(|&x| x <= h));
        }
    }
}
