//! Exact elementary number theory: factorization, multiplicative functions,
//! CRT, and prime enumeration.
//!
//! Trial division is deliberate: every modulus this crate touches is desk
//! scale (≤ ~10^12) and determinism beats asymptotics there.

use crate::error::{Error, Result};
use crate::Rational;
use num_bigint::BigInt;

/// A squarefree modulus `q` together with its prime factorization and the
/// derived Euler quantities `φ(q)` and `P = φ(q)/q`.
///
/// `q = 1` is permitted: empty prime list, `φ = 1`, `P = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SquarefreeModulus {
    q: u64,
    primes: Vec<u64>,
    phi: u64,
}

impl SquarefreeModulus {
    /// Builds directly from a strictly increasing list of distinct primes.
    pub fn from_primes(primes: Vec<u64>) -> Result<Self> {
        let mut q: u64 = 1;
        let mut phi: u64 = 1;
        for (i, &p) in primes.iter().enumerate() {
            if !is_prime(p) {
                return Err(Error::Parse(format!("{p} is not prime")));
            }
            if i > 0 && primes[i - 1] >= p {
                return Err(Error::Parse("primes must be strictly increasing".into()));
            }
            q = q
                .checked_mul(p)
                .ok_or(Error::PreconditionViolated("modulus overflows u64".into()))?;
            phi *= p - 1;
        }
        Ok(Self { q, primes, phi })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// ω(q), the number of distinct prime factors.
    pub fn omega(&self) -> u32 {
        self.primes.len() as u32
    }

    pub fn phi(&self) -> u64 {
        self.phi
    }

    /// `P = φ(q)/q` in lowest terms.
    pub fn p_ratio(&self) -> Rational {
        Rational::new(BigInt::from(self.phi), BigInt::from(self.q))
    }

    /// All 2^ω squarefree divisors, sorted ascending. The first entry is 1.
    pub fn divisors(&self) -> Vec<SquarefreeModulus> {
        let omega = self.primes.len();
        let mut out = Vec::with_capacity(1 << omega);
        for mask in 0u32..(1 << omega) {
            let primes: Vec<u64> = (0..omega)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.primes[i])
                .collect();
            let q = primes.iter().product::<u64>();
            let phi = primes.iter().map(|p| p - 1).product::<u64>();
            out.push(SquarefreeModulus { q, primes, phi });
        }
        out.sort_by_key(|d| d.q);
        out
    }

    /// μ(q) for the squarefree q itself: (−1)^ω.
    pub fn moebius(&self) -> i64 {
        if self.primes.len().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

impl std::fmt::Display for SquarefreeModulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.q)
    }
}

/// Factors `n ≥ 1` and errors with [`Error::NotSquarefree`] if any prime
/// divides it twice.
pub fn factor_squarefree(n: u64) -> Result<SquarefreeModulus> {
    assert!(n >= 1, "modulus must be positive");
    let mut m = n;
    let mut primes = Vec::new();
    let mut phi = 1u64;
    let mut d = 2u64;
    while d as u128 * d as u128 <= m as u128 {
        if m.is_multiple_of(d) {
            m /= d;
            if m.is_multiple_of(d) {
                return Err(Error::NotSquarefree { n, p: d });
            }
            primes.push(d);
            phi *= d - 1;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        primes.push(m);
        phi *= m - 1;
    }
    Ok(SquarefreeModulus { q: n, primes, phi })
}

/// The radical `∏_{p|n} p` of `n ≥ 1`, as a squarefree modulus.
pub fn radical(n: u64) -> SquarefreeModulus {
    assert!(n >= 1, "argument must be positive");
    let mut m = n;
    let mut primes = Vec::new();
    let mut d = 2u64;
    while d as u128 * d as u128 <= m as u128 {
        if m.is_multiple_of(d) {
            primes.push(d);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        primes.push(m);
    }
    let q = primes.iter().product::<u64>();
    let phi = primes.iter().map(|p| p - 1).product::<u64>();
    SquarefreeModulus { q, primes, phi }
}

/// Möbius function; 0 when a square divides `n`.
pub fn moebius(n: u64) -> i64 {
    assert!(n >= 1);
    match factor_squarefree(n) {
        Ok(m) => m.moebius(),
        Err(_) => 0,
    }
}

/// Euler totient of an arbitrary positive integer.
pub fn totient(n: u64) -> u64 {
    assert!(n >= 1);
    let mut m = n;
    let mut phi = n;
    let mut d = 2u64;
    while d as u128 * d as u128 <= m as u128 {
        if m.is_multiple_of(d) {
            phi -= phi / d;
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        phi -= phi / m;
    }
    phi
}

pub fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    num_integer::lcm(a, b)
}

/// Inverse of `a` modulo `m ≥ 1`, in `[0, m)`.
pub fn mod_inverse(a: u64, m: u64) -> Result<u64> {
    assert!(m >= 1);
    if m == 1 {
        return Ok(0);
    }
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let quot = r / new_r;
        (t, new_t) = (new_t, t - quot * new_t);
        (r, new_r) = (new_r, r - quot * new_r);
    }
    if r != 1 {
        return Err(Error::NonInvertible { a, modulus: m });
    }
    Ok(t.rem_euclid(m as i128) as u64)
}

/// Combines residue–modulus pairs into the unique residue modulo `∏ m_i`.
/// Moduli must be pairwise coprime; the empty list combines to 0 (mod 1).
pub fn crt_combine(pairs: &[(u64, u64)]) -> Result<u64> {
    let mut x: u128 = 0;
    let mut m: u128 = 1;
    for &(r, mi) in pairs {
        assert!(mi >= 1);
        let g = gcd((m % mi as u128) as u64, mi);
        if g != 1 {
            return Err(Error::NonCoprimeModuli {
                a: (m % mi as u128) as u64,
                b: mi,
            });
        }
        // x' ≡ x (mod m), x' ≡ r (mod mi)
        let inv = mod_inverse((m % mi as u128) as u64, mi)? as u128;
        let diff = ((r as u128 + mi as u128) - (x % mi as u128)) % mi as u128;
        x += m * ((diff * inv) % mi as u128);
        m = m
            .checked_mul(mi as u128)
            .ok_or(Error::PreconditionViolated("CRT modulus overflows".into()))?;
        if m > u64::MAX as u128 {
            return Err(Error::PreconditionViolated(
                "CRT modulus exceeds u64".into(),
            ));
        }
    }
    Ok(x as u64)
}

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d as u128 * d as u128 <= n as u128 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// All primes `p ≤ n`, by a plain sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut j = p * p;
            while j <= n {
                composite[j] = true;
                j += p;
            }
        }
    }
    primes
}

const SEGMENT_LEN: u64 = 1 << 16;

/// All primes in the inclusive range `[lo, hi]`, by a segmented sieve.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || lo > hi {
        return Vec::new();
    }
    let lo = lo.max(2);
    let base = primes_up_to(hi.isqrt());
    let mut out = Vec::new();
    let mut seg_lo = lo;
    while seg_lo <= hi {
        let seg_hi = (seg_lo + SEGMENT_LEN - 1).min(hi);
        let len = (seg_hi - seg_lo + 1) as usize;
        let mut composite = vec![false; len];
        for &p in &base {
            if p * p > seg_hi {
                break;
            }
            let mut j = (seg_lo.div_ceil(p) * p).max(p * p);
            while j <= seg_hi {
                composite[(j - seg_lo) as usize] = true;
                j += p;
            }
        }
        for (i, &c) in composite.iter().enumerate() {
            let n = seg_lo + i as u64;
            if !c && n >= 2 {
                out.push(n);
            }
        }
        seg_lo = seg_hi + 1;
    }
    out
}

/// Primorials `2, 6, 30, …` with up to `omega_max` prime factors.
pub fn primorials(omega_max: u32) -> Vec<SquarefreeModulus> {
    let mut out = Vec::new();
    let mut primes = Vec::new();
    let mut p = 2u64;
    for _ in 0..omega_max {
        primes.push(p);
        out.push(SquarefreeModulus::from_primes(primes.clone()).expect("primorial"));
        p = (p + 1..).find(|&m| is_prime(m)).expect("next prime");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn factor_squarefree_examples() {
        let m = factor_squarefree(30).unwrap();
        assert_eq!(m.primes(), &[2, 3, 5]);
        assert_eq!(m.phi(), 8);
        assert_eq!(m.p_ratio(), Rational::new(4.into(), 15.into()));

        let one = factor_squarefree(1).unwrap();
        assert_eq!(one.primes(), &[] as &[u64]);
        assert_eq!(one.phi(), 1);
        assert!(one.p_ratio().is_one());

        assert_eq!(
            factor_squarefree(12),
            Err(Error::NotSquarefree { n: 12, p: 2 })
        );
    }

    #[test]
    fn radical_examples() {
        assert_eq!(radical(12).q(), 6);
        assert_eq!(radical(30).q(), 30);
        assert_eq!(radical(1).q(), 1);
    }

    #[test]
    fn moebius_examples() {
        assert_eq!(moebius(30), -1);
        assert_eq!(moebius(1), 1);
        assert_eq!(moebius(4), 0);
        assert_eq!(moebius(6), 1);
    }

    #[test]
    fn moebius_divisor_sum_vanishes() {
        // Σ_{d|n} μ(d) = [n = 1] for n ≤ 10^4.
        for n in 1u64..=10_000 {
            let mut s = 0i64;
            let mut d = 1;
            while d * d <= n {
                if n % d == 0 {
                    s += moebius(d);
                    if d != n / d {
                        s += moebius(n / d);
                    }
                }
                d += 1;
            }
            assert_eq!(s, i64::from(n == 1), "n = {n}");
        }
    }

    #[test]
    fn totient_product_formula_squarefree() {
        for n in 1u64..=10_000 {
            if let Ok(m) = factor_squarefree(n) {
                let mut expect = Rational::new(BigInt::from(n), BigInt::one());
                for &p in m.primes() {
                    expect *= Rational::new(BigInt::from(p - 1), BigInt::from(p));
                }
                assert_eq!(
                    expect,
                    Rational::new(BigInt::from(totient(n)), BigInt::one())
                );
                assert_eq!(m.phi(), totient(n));
            }
        }
    }

    #[test]
    fn moebius_is_multiplicative() {
        for a in 1u64..=200 {
            for b in 1u64..=200 {
                if gcd(a, b) == 1 {
                    assert_eq!(moebius(a * b), moebius(a) * moebius(b));
                }
            }
        }
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(3, 5).unwrap(), 2);
        assert_eq!(mod_inverse(1, 1).unwrap(), 0);
        assert!(matches!(
            mod_inverse(4, 6),
            Err(Error::NonInvertible { .. })
        ));
        for m in 2u64..200 {
            for a in 1..m {
                if gcd(a, m) == 1 {
                    let inv = mod_inverse(a, m).unwrap();
                    assert_eq!(a * inv % m, 1);
                }
            }
        }
    }

    #[test]
    fn crt_combine_examples() {
        // Unique solution in [0, 15): scan confirms 14.
        let expect = (0u64..15).find(|&x| x % 3 == 2 && x % 5 == 4).unwrap();
        assert_eq!(expect, 14);
        assert_eq!(crt_combine(&[(2, 3), (4, 5)]).unwrap(), 14);
        assert_eq!(crt_combine(&[]).unwrap(), 0);
        assert!(matches!(
            crt_combine(&[(1, 6), (2, 4)]),
            Err(Error::NonCoprimeModuli { .. })
        ));
    }

    #[test]
    fn crt_roundtrip_squarefree() {
        // Every residue exhaustively for small q, spot residues up to 10^4.
        for n in 2u64..=10_000 {
            if let Ok(m) = factor_squarefree(n) {
                let xs: Vec<u64> = if n <= 2000 {
                    (0..n).collect()
                } else {
                    vec![0, 1, n / 3, n / 2, n - 1]
                };
                for x in xs {
                    let pairs: Vec<(u64, u64)> = m.primes().iter().map(|&p| (x % p, p)).collect();
                    assert_eq!(crt_combine(&pairs).unwrap(), x, "n = {n}, x = {x}");
                }
            }
        }
    }

    #[test]
    fn primes_in_range_matches_plain_sieve() {
        let all = primes_up_to(2000);
        let ranged = primes_in_range(0, 2000);
        assert_eq!(all, ranged);
        assert_eq!(
            primes_in_range(51, 99),
            vec![53, 59, 61, 67, 71, 73, 79, 83, 89, 97]
        );
        assert_eq!(primes_in_range(90, 96), Vec::<u64>::new());
    }

    #[test]
    fn primorial_family() {
        let fam = primorials(6);
        let qs: Vec<u64> = fam.iter().map(|m| m.q()).collect();
        assert_eq!(qs, vec![2, 6, 30, 210, 2310, 30030]);
    }

    #[test]
    fn divisors_of_30() {
        let m = factor_squarefree(30).unwrap();
        let ds: Vec<u64> = m.divisors().iter().map(|d| d.q()).collect();
        assert_eq!(ds, vec![1, 2, 3, 5, 6, 10, 15, 30]);
    }
}
