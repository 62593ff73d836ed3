//! Exponential sums and the expansions built from them: the coprimality
//! indicator `k_q`, the window sum `E_h`, its envelope `F`, the multiplicative
//! weight `μ_D(a, r)`, the singular-series divisor sum, and the
//! representation-counting and bilinear machinery for fractions mod 1.
//!
//! Floating point enters only here. Arguments of `e(x)` are reduced to [0, 1)
//! in exact integer arithmetic before conversion, and long accumulations use
//! Kahan compensation, so identity checks can use the additive tolerance
//! policy of [`identity_tolerance`].

use crate::arith::{self, SquarefreeModulus};
use crate::error::{Error, Result};
use crate::tuples::{density, OffsetSet};
use crate::{rational_to_f64, Rational};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use std::f64::consts::PI;

/// The class of `a/r` in [0, 1), stored normalized with `0 ≤ a < r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FractionModOne {
    a: u64,
    r: u64,
}

impl FractionModOne {
    pub fn new(a: i64, r: u64) -> Self {
        assert!(r >= 1);
        Self {
            a: a.rem_euclid(r as i64) as u64,
            r,
        }
    }

    pub fn from_wide(a: u128, r: u64) -> Self {
        assert!(r >= 1);
        Self {
            a: (a % r as u128) as u64,
            r,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.a
    }

    pub fn denominator(&self) -> u64 {
        self.r
    }

    /// Lowest terms; the zero class reduces to 0/1.
    pub fn reduce(self) -> Self {
        if self.a == 0 {
            return Self { a: 0, r: 1 };
        }
        let g = arith::gcd(self.a, self.r);
        Self {
            a: self.a / g,
            r: self.r / g,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.a == 0
    }

    pub fn as_f64(&self) -> f64 {
        self.a as f64 / self.r as f64
    }

    /// Distance to the nearest integer as an exact pair (numerator, r).
    pub fn distance_to_integer(&self) -> (u64, u64) {
        (self.a.min(self.r - self.a), self.r)
    }
}

impl std::fmt::Display for FractionModOne {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.a, self.r)
    }
}

/// `e(x) = exp(2πi x)` with the argument already reduced to [0, 1).
pub fn unit_phase(x: FractionModOne) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x.as_f64())
}

/// Compensated complex accumulator for long identity sums.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: Complex64,
    carry: Complex64,
}

impl Kahan {
    fn add(&mut self, x: Complex64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> Complex64 {
        self.sum
    }
}

/// Absolute tolerance for an identity evaluated by summing `terms` terms.
pub fn identity_tolerance(terms: u64) -> f64 {
    1e-12 * terms as f64 + 1e-9
}

/// `k_q(m)`: 1 if `gcd(m mod q, q) = 1`, else 0. For q = 1 always 1.
pub fn kq_indicator(q: &SquarefreeModulus, m: i64) -> u64 {
    let m = m.rem_euclid(q.q() as i64) as u64;
    (arith::gcd(m, q.q()) == 1) as u64
}

/// Ramanujan-style expansion of the indicator:
/// `k_q(m) = P Σ_{r|q} (μ(r)/φ(r)) Σ_{0<a≤r, (a,r)=1} e(m a/r)`,
/// evaluated by direct summation over all q terms.
pub fn kq_expansion(q: &SquarefreeModulus, m: i64) -> Complex64 {
    let mut acc = Kahan::default();
    for r in q.divisors() {
        let rv = r.q();
        let coeff = r.moebius() as f64 / r.phi() as f64;
        let mred = m.rem_euclid(rv as i64) as u128;
        for a in 1..=rv {
            if arith::gcd(a, rv) == 1 {
                let x = FractionModOne::from_wide(mred * a as u128, rv);
                acc.add(unit_phase(x) * coeff);
            }
        }
    }
    acc.value() * (q.phi() as f64 / q.q() as f64)
}

/// `E_h(x) = Σ_{m=1}^{h} e(m x)`, closed form. Integer x gives exactly h, and
/// a full period (`h x ∈ ℤ`, `x ∉ ℤ`) gives exactly 0.
pub fn window_expsum(x: FractionModOne, h: u64) -> Complex64 {
    assert!(h >= 1);
    let (a, r) = (x.a, x.r);
    if a == 0 {
        return Complex64::new(h as f64, 0.0);
    }
    let ha = h as u128 * a as u128;
    if ha.is_multiple_of(r as u128) {
        return Complex64::zero();
    }
    // E_h(x) = e((h+1)x/2) · sin(πhx)/sin(πx); both arguments reduced exactly.
    let num_arg = (ha % (2 * r as u128)) as f64 / r as f64;
    let den_arg = a as f64 / r as f64;
    let ratio = (PI * num_arg).sin() / (PI * den_arg).sin();
    let phase_arg = ((h as u128 + 1) * a as u128 % (2 * r as u128)) as f64 / (2.0 * r as f64);
    Complex64::from_polar(ratio, 2.0 * PI * phase_arg)
}

/// `E_h` for a real argument; used by grid diagnostics.
pub fn window_expsum_f64(x: f64, h: u64) -> Complex64 {
    assert!(h >= 1);
    let t = x.rem_euclid(1.0);
    if t == 0.0 {
        return Complex64::new(h as f64, 0.0);
    }
    let ratio = (PI * h as f64 * t).sin() / (PI * t).sin();
    Complex64::from_polar(ratio, PI * (h as f64 + 1.0) * t)
}

/// `F(x) = min(h, 1/‖x‖)` with `F(integer) = h`.
pub fn window_envelope(x: FractionModOne, h: u64) -> f64 {
    assert!(h >= 1);
    if x.a == 0 {
        return h as f64;
    }
    let j = x.a.min(x.r - x.a);
    if h as u128 * j as u128 >= x.r as u128 {
        x.r as f64 / j as f64
    } else {
        h as f64
    }
}

/// `F` for a real argument.
pub fn window_envelope_f64(x: f64, h: u64) -> f64 {
    assert!(h >= 1);
    let t = x.rem_euclid(1.0);
    let dist = t.min(1.0 - t);
    if dist == 0.0 {
        h as f64
    } else {
        (h as f64).min(1.0 / dist)
    }
}

fn envelope_rational(a: u64, r: u64, h: u64) -> Rational {
    if a == 0 {
        return Rational::from_integer(h.into());
    }
    let j = a.min(r - a);
    if h as u128 * j as u128 >= r as u128 {
        Rational::new(BigInt::from(r), BigInt::from(j))
    } else {
        Rational::from_integer(h.into())
    }
}

/// Per-prime character-sum tables for a squarefree denominator r: for each
/// p | r the values `Σ_{s ∈ S_p} e(s b / p)` indexed by b ∈ [0, p), together
/// with the inverse of r/p used to turn `a mod r` into the per-prime index.
#[derive(Debug, Clone)]
pub struct CharacterSumProfile {
    r: SquarefreeModulus,
    per_prime: Vec<PrimeFactorTable>,
}

#[derive(Debug, Clone)]
struct PrimeFactorTable {
    p: u64,
    inv_cofactor: u64,
    set_size: u64,
    factors: Vec<Complex64>,
}

impl CharacterSumProfile {
    /// Builds tables from explicit residue sets; `sets[i]` lives mod
    /// `r.primes()[i]`.
    pub fn new(r: &SquarefreeModulus, sets: &[Vec<u64>]) -> Self {
        assert_eq!(sets.len(), r.primes().len());
        let per_prime = r
            .primes()
            .iter()
            .zip(sets)
            .map(|(&p, set)| {
                debug_assert!(set.iter().all(|&s| s < p));
                let cof = (r.q() / p) % p;
                let inv_cofactor = arith::mod_inverse(cof, p).expect("r squarefree");
                let factors = (0..p)
                    .map(|b| {
                        let mut acc = Kahan::default();
                        for &s in set {
                            acc.add(unit_phase(FractionModOne::from_wide(
                                s as u128 * b as u128,
                                p,
                            )));
                        }
                        acc.value()
                    })
                    .collect();
                PrimeFactorTable {
                    p,
                    inv_cofactor,
                    set_size: set.len() as u64,
                    factors,
                }
            })
            .collect();
        Self {
            r: r.clone(),
            per_prime,
        }
    }

    /// Tables for `D_p = {h mod p : h ∈ D}` (distinct residues).
    pub fn from_offsets(r: &SquarefreeModulus, d: &OffsetSet) -> Self {
        let sets: Vec<Vec<u64>> = r.primes().iter().map(|&p| d.residues_mod(p)).collect();
        Self::new(r, &sets)
    }

    pub fn r(&self) -> u64 {
        self.r.q()
    }

    /// `μ(a, r) = ∏_{p|r} Σ_{s ∈ S_p} e(s a (r/p)_p^{-1} / p)` for gcd(a, r) = 1.
    pub fn mu(&self, a: u64) -> Result<Complex64> {
        if a == 0 || a > self.r.q() || arith::gcd(a, self.r.q()) != 1 {
            return Err(Error::NonCoprime { a, r: self.r.q() });
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for t in &self.per_prime {
            let b = (a % t.p) as u128 * t.inv_cofactor as u128 % t.p as u128;
            prod *= t.factors[b as usize];
        }
        Ok(prod)
    }

    /// `∏ |S_p|`, the trivial magnitude bound (equals s^{ω(r)} when every
    /// set has s elements).
    pub fn trivial_bound(&self) -> f64 {
        self.per_prime.iter().map(|t| t.set_size as f64).product()
    }

    /// For each p | r, `max_{b ∈ [1,p)} |Σ_{s ∈ S_p} e(s b / p)|`.
    pub fn max_factor_magnitudes(&self) -> Vec<f64> {
        self.per_prime
            .iter()
            .map(|t| {
                (1..t.p)
                    .map(|b| t.factors[b as usize].norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// The factor `Σ_{s ∈ S_p} e(s b / p)` for the i-th prime of r.
    pub fn factor(&self, prime_index: usize, b: u64) -> Complex64 {
        let t = &self.per_prime[prime_index];
        t.factors[(b % t.p) as usize]
    }
}

/// `μ_D(a, r)` with `D_p = {h mod p : h ∈ D}`. Requires `0 < a ≤ r` coprime
/// to r; for r = 1 the empty product is 1.
pub fn mu_d(d: &OffsetSet, a: u64, r: &SquarefreeModulus) -> Result<Complex64> {
    CharacterSumProfile::from_offsets(r, d).mu(a)
}

/// The tuple-indicator expansion
/// `∏_i k_q(m+h_i) = P_D Σ_{r|q} (μ(r)/φ_D(r)) Σ_{(a,r)=1} e(m a/r) μ_D(a, r)`,
/// evaluated by direct summation. Errors with [`Error::ZeroDensity`] when
/// `φ_D(q) = 0` since the denominators vanish.
pub fn product_expansion(q: &SquarefreeModulus, d: &OffsetSet, m: i64) -> Result<Complex64> {
    let dens = density(q, d);
    if dens.phi_d == 0 {
        return Err(Error::ZeroDensity);
    }
    let mut acc = Kahan::default();
    for r in q.divisors() {
        let profile = CharacterSumProfile::from_offsets(&r, d);
        let phi_d_r: u64 = r
            .primes()
            .iter()
            .map(|&p| p - crate::tuples::nu_p(d, p))
            .product();
        let coeff = r.moebius() as f64 / phi_d_r as f64;
        let rv = r.q();
        let mred = m.rem_euclid(rv as i64) as u128;
        for a in 1..=rv {
            if arith::gcd(a, rv) == 1 {
                let phase = unit_phase(FractionModOne::from_wide(mred * a as u128, rv));
                acc.add(phase * profile.mu(a)? * coeff);
            }
        }
    }
    Ok(acc.value() * rational_to_f64(&dens.p_d))
}

/// Budget on the number of enumerated terms in divisor-tuple sums.
#[derive(Debug, Clone, Copy)]
pub struct TermBudget {
    pub max_terms: u128,
}

impl Default for TermBudget {
    fn default() -> Self {
        TermBudget {
            max_terms: 200_000_000,
        }
    }
}

/// The Hardy–Littlewood divisor-tuple sum
/// `Σ_{r_1..r_s|q} (∏ μ(r_i)/φ(r_i)) Σ_{Σ a_i/r_i ∈ ℤ} e(Σ h_i a_i/r_i)`,
/// which must reproduce the singular series `𝔖_q(D)`. Term count is q^s.
pub fn singular_series_expsum(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    budget: &TermBudget,
) -> Result<Complex64> {
    let s = d.s() as usize;
    let qv = q.q();
    let mut work: u128 = 1;
    for _ in 0..s {
        work = work
            .checked_mul(qv as u128)
            .filter(|&w| w <= budget.max_terms)
            .ok_or(Error::BudgetExceeded {
                what: "singular series terms",
                required: u128::MAX,
                budget: budget.max_terms,
            })?;
    }
    let divs = q.divisors();
    let mut acc = Kahan::default();
    // Every a_i/r_i is carried as a_i (q/r_i) over the common denominator q.
    #[allow(clippy::too_many_arguments)]
    fn rec(
        level: usize,
        num_constraint: u64,
        num_phase: u64,
        coeff: f64,
        qv: u64,
        offsets: &[i64],
        divs: &[SquarefreeModulus],
        acc: &mut Kahan,
    ) {
        if level == offsets.len() {
            if num_constraint == 0 {
                acc.add(unit_phase(FractionModOne::new(num_phase as i64, qv)) * coeff);
            }
            return;
        }
        for r in divs {
            let rv = r.q();
            let w = qv / rv;
            let c2 = coeff * r.moebius() as f64 / r.phi() as f64;
            let h_red = offsets[level].rem_euclid(rv as i64) as u128;
            for a in 1..=rv {
                if arith::gcd(a, rv) == 1 {
                    let nc = ((num_constraint as u128 + a as u128 * w as u128) % qv as u128) as u64;
                    let np = ((num_phase as u128 + (h_red * a as u128 % rv as u128) * w as u128)
                        % qv as u128) as u64;
                    rec(level + 1, nc, np, c2, qv, offsets, divs, acc);
                }
            }
        }
    }
    rec(0, 0, 0, 1.0, qv, d.offsets(), &divs, &mut acc);
    Ok(acc.value())
}

/// Representation counts of every target `t/lcm` by sums `Σ a_i/r_i` with
/// `0 < a_i ≤ r_i`, from exhaustive enumeration of all `∏ r_i` tuples.
#[derive(Debug, Clone)]
pub struct RepresentationHistogram {
    pub lcm: u64,
    pub tuple_count: u64,
    /// `counts[t]` = number of tuples with `Σ a_i/r_i ≡ t/lcm (mod 1)`.
    pub counts: Vec<u64>,
}

pub fn representation_histogram(
    r_list: &[u64],
    budget: &TermBudget,
) -> Result<RepresentationHistogram> {
    assert!(!r_list.is_empty());
    for &r in r_list {
        arith::factor_squarefree(r)?;
    }
    let mut total: u128 = 1;
    let mut l: u64 = 1;
    for &r in r_list {
        total = total
            .checked_mul(r as u128)
            .filter(|&t| t <= budget.max_terms)
            .ok_or(Error::BudgetExceeded {
                what: "representation tuples",
                required: u128::MAX,
                budget: budget.max_terms,
            })?;
        l = arith::lcm(l, r);
    }
    let weights: Vec<u64> = r_list.iter().map(|&r| l / r).collect();
    let mut counts = vec![0u64; l as usize];
    fn rec(level: usize, t: u64, l: u64, r_list: &[u64], weights: &[u64], counts: &mut [u64]) {
        let (r, w) = (r_list[level], weights[level]);
        if level + 1 == r_list.len() {
            let mut pos = t;
            for _ in 1..=r {
                pos += w;
                if pos >= l {
                    pos -= l;
                }
                counts[pos as usize] += 1;
            }
            return;
        }
        let mut pos = t;
        for _ in 1..=r {
            pos += w;
            if pos >= l {
                pos -= l;
            }
            rec(level + 1, pos, l, r_list, weights, counts);
        }
    }
    rec(0, 0, l, r_list, &weights, &mut counts);
    Ok(RepresentationHistogram {
        lcm: l,
        tuple_count: total as u64,
        counts,
    })
}

/// Count of tuples `(a_1..a_s)`, `0 < a_i ≤ r_i`, with `Σ a_i/r_i ≡ target`
/// (mod 1). Always 0 or exactly `∏ r_i / lcm(r_i)`.
pub fn representation_count(
    r_list: &[u64],
    target: FractionModOne,
    budget: &TermBudget,
) -> Result<u64> {
    let hist = representation_histogram(r_list, budget)?;
    let t = target.reduce();
    if hist.lcm % t.denominator() != 0 {
        return Ok(0);
    }
    let idx = t.numerator() * (hist.lcm / t.denominator());
    Ok(hist.counts[idx as usize])
}

/// Outcome of the constrained bilinear sum of `F` products.
#[derive(Debug, Clone)]
pub struct ConstrainedProductSum {
    /// `Σ_{Σ a_i/q_i ∈ ℤ, 0<a_i<q_i} ∏ F(a_i/q_i)`, exact.
    pub value: Rational,
    /// Number of constrained tuples.
    pub tuple_count: u64,
    /// `(1/d) ∏ q_i (C_F min(q_i, h))^{1/2}` with `d = lcm(q_i)`.
    pub bound: f64,
}

impl ConstrainedProductSum {
    pub fn holds(&self) -> bool {
        rational_to_f64(&self.value) <= self.bound * (1.0 + 1e-12)
    }
}

/// Enumerates the constrained product sum exactly and evaluates the bilinear
/// bound with `G_0(q) = C_F · min(q, h)`.
pub fn constrained_product_sum(
    q_list: &[u64],
    h: u64,
    budget: &TermBudget,
) -> Result<ConstrainedProductSum> {
    assert!(h >= 1);
    assert!(!q_list.is_empty());
    for &qi in q_list {
        if qi <= 1 {
            return Err(Error::PreconditionViolated(format!(
                "q_i must exceed 1, got {qi}"
            )));
        }
        arith::factor_squarefree(qi)?;
    }
    let mut total: u128 = 1;
    let mut d: u64 = 1;
    for &qi in q_list {
        total = total
            .checked_mul((qi - 1) as u128)
            .filter(|&t| t <= budget.max_terms)
            .ok_or(Error::BudgetExceeded {
                what: "constrained tuples",
                required: u128::MAX,
                budget: budget.max_terms,
            })?;
        d = arith::lcm(d, qi);
    }
    let _ = total;
    let weights: Vec<u64> = q_list.iter().map(|&qi| d / qi).collect();
    let mut value = Rational::zero();
    let mut tuple_count = 0u64;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        level: usize,
        t: u64,
        prod: Rational,
        d: u64,
        h: u64,
        q_list: &[u64],
        weights: &[u64],
        value: &mut Rational,
        tuple_count: &mut u64,
    ) {
        let (qi, w) = (q_list[level], weights[level]);
        for a in 1..qi {
            let nt = (t + a * w) % d;
            let np = &prod * envelope_rational(a, qi, h);
            if level + 1 == q_list.len() {
                if nt == 0 {
                    *value += np;
                    *tuple_count += 1;
                }
            } else {
                rec(level + 1, nt, np, d, h, q_list, weights, value, tuple_count);
            }
        }
    }
    rec(
        0,
        0,
        Rational::from_integer(1.into()),
        d,
        h,
        q_list,
        &weights,
        &mut value,
        &mut tuple_count,
    );
    let bound = q_list
        .iter()
        .map(|&qi| qi as f64 * (F_ENVELOPE_CORRELATION_MAX * qi.min(h) as f64).sqrt())
        .product::<f64>()
        / d as f64;
    Ok(ConstrainedProductSum {
        value,
        tuple_count,
        bound,
    })
}

/// `Σ_{0<a<q} F(a/q)^2`, exact, with its ratio to `q·min(q, h)`.
#[derive(Debug, Clone)]
pub struct FCorrelation {
    pub value: Rational,
    pub ratio: f64,
}

pub fn f_correlation(q: u64, h: u64) -> FCorrelation {
    assert!(q >= 2 && h >= 1);
    let mut value = Rational::zero();
    for j in 1..=q / 2 {
        let weight = if q.is_multiple_of(2) && j == q / 2 {
            1u64
        } else {
            2
        };
        let term = if h as u128 * j as u128 >= q as u128 {
            Rational::new(BigInt::from(q * q), BigInt::from(j * j))
        } else {
            Rational::from_integer(BigInt::from(h * h))
        };
        value += term * Rational::from_integer(weight.into());
    }
    let ratio = rational_to_f64(&value) / (q as f64 * q.min(h) as f64);
    FCorrelation { value, ratio }
}

/// Empirical maximum of `f_correlation(q, h) / (q · min(q, h))` over
/// `2 ≤ q ≤ 2000`, `1 ≤ h ≤ 2000`, measured by [`f_correlation_ratio_max`]
/// and frozen here as the regression constant `C_F` used in `G_0`.
pub const F_ENVELOPE_CORRELATION_MAX: f64 = 3.911_142_816_368_933_2;

/// Scans the correlation ratio over the grid and returns the maximum with its
/// argmax. For h ≥ q the ratio no longer depends on h, so the scan is O(q)
/// per modulus after an O(q) prefix pass.
pub fn f_correlation_ratio_max(q_max: u64, h_max: u64) -> (f64, u64, u64) {
    let mut best = (0.0f64, 0u64, 0u64);
    for q in 2..=q_max {
        let half = (q / 2) as usize;
        // prefix_count[j] = Σ_{i≤j} w_i, prefix_inv2[j] = Σ_{i≤j} w_i/i².
        let mut prefix_count = vec![0f64; half + 1];
        let mut prefix_inv2 = vec![0f64; half + 1];
        for j in 1..=half {
            let w = if q % 2 == 0 && j == half { 1.0 } else { 2.0 };
            prefix_count[j] = prefix_count[j - 1] + w;
            prefix_inv2[j] = prefix_inv2[j - 1] + w / (j as f64 * j as f64);
        }
        for h in 1..=q.min(h_max) {
            // Term j contributes h² while h·j < q, else (q/j)².
            let jcut = (q.div_ceil(h) as usize).min(half + 1);
            let capped = prefix_count[jcut - 1];
            let tail = prefix_inv2[half] - prefix_inv2[jcut - 1];
            let s = (h * h) as f64 * capped + (q * q) as f64 * tail;
            let ratio = s / (q as f64 * q.min(h) as f64);
            if ratio > best.0 {
                best = (ratio, q, h);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factor_squarefree;
    use proptest::prelude::*;

    fn d(list: &[i64]) -> OffsetSet {
        OffsetSet::new(list.to_vec()).unwrap()
    }

    #[test]
    fn fraction_normalization() {
        let x = FractionModOne::new(-1, 5);
        assert_eq!((x.numerator(), x.denominator()), (4, 5));
        assert_eq!(
            FractionModOne::new(10, 5).reduce(),
            FractionModOne::new(0, 1)
        );
        assert_eq!(
            FractionModOne::new(4, 6).reduce(),
            FractionModOne::new(2, 3)
        );
    }

    #[test]
    fn indicator_examples() {
        let q6 = factor_squarefree(6).unwrap();
        assert_eq!(kq_indicator(&q6, 5), 1);
        assert_eq!(kq_indicator(&q6, 4), 0);
        let q1 = factor_squarefree(1).unwrap();
        assert_eq!(kq_indicator(&q1, 0), 1);
    }

    #[test]
    fn kq_expansion_hand_case() {
        // q = 2, m = 1: (1/2)(1 + (−1)(−1)) = 1.
        let q2 = factor_squarefree(2).unwrap();
        let v = kq_expansion(&q2, 1);
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kq_expansion_matches_indicator() {
        for n in [6u64, 15, 30, 105, 210] {
            let q = factor_squarefree(n).unwrap();
            for m in 0..n as i64 {
                let got = kq_expansion(&q, m);
                let want = kq_indicator(&q, m) as f64;
                assert!(
                    (got - Complex64::new(want, 0.0)).norm() <= 1e-9,
                    "q = {n}, m = {m}: {got}"
                );
            }
        }
    }

    #[test]
    fn window_expsum_examples() {
        assert_eq!(
            window_expsum(FractionModOne::new(0, 1), 9),
            Complex64::new(9.0, 0.0)
        );
        let e = window_expsum(FractionModOne::new(1, 2), 3);
        assert!((e - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        // Full geometric period vanishes exactly.
        for q in [3u64, 7, 12] {
            for a in 1..q {
                assert_eq!(
                    window_expsum(FractionModOne::new(a as i64, q), q),
                    Complex64::zero()
                );
            }
        }
        // Definition cross-check by direct summation.
        for (a, r, h) in [(1u64, 7u64, 11u64), (3, 8, 5), (2, 9, 30)] {
            let direct: Complex64 = (1..=h)
                .map(|m| unit_phase(FractionModOne::from_wide(m as u128 * a as u128, r)))
                .sum();
            let closed = window_expsum(FractionModOne::new(a as i64, r), h);
            assert!((direct - closed).norm() < 1e-10);
        }
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(window_envelope(FractionModOne::new(0, 3), 7), 7.0);
        assert_eq!(window_envelope(FractionModOne::new(1, 2), 5), 2.0);
        assert_eq!(window_envelope(FractionModOne::new(1, 3), 10), 3.0);
        assert_eq!(window_envelope_f64(0.5, 5), 2.0);
    }

    #[test]
    fn mu_d_examples() {
        // Singleton D: every factor is e(0) = 1.
        let q = factor_squarefree(105).unwrap();
        for r in q.divisors() {
            for a in 1..=r.q() {
                if arith::gcd(a, r.q()) == 1 {
                    let v = mu_d(&d(&[0]), a, &r).unwrap();
                    assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
        // Negated non-residues mod 5: |e(2/5) + e(3/5)| = (1 + √5)/2.
        let r5 = factor_squarefree(5).unwrap();
        let v = mu_d(&d(&[2, 3]), 1, &r5).unwrap();
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((v.norm() - golden).abs() < 1e-12);
        // D*_5 = {0, 2, 4} at a = 3: magnitude ≥ 5/π.
        let v = mu_d(&d(&[0, 2, 4]), 3, &r5).unwrap();
        assert!((v.norm() - golden).abs() < 1e-12);
        assert!(v.norm() >= 5.0 / std::f64::consts::PI);

        assert!(matches!(
            mu_d(&d(&[0, 2]), 3, &factor_squarefree(6).unwrap()),
            Err(Error::NonCoprime { .. })
        ));
    }

    #[test]
    fn product_expansion_examples() {
        let q15 = factor_squarefree(15).unwrap();
        let dd = d(&[0, 2]);
        let v = product_expansion(&q15, &dd, 11).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() <= 1e-9);
        let v = product_expansion(&q15, &dd, 3).unwrap();
        assert!(v.norm() <= 1e-9);
        // s = 1 reduces to the k_q expansion.
        let q30 = factor_squarefree(30).unwrap();
        for m in 0..30 {
            let a = product_expansion(&q30, &d(&[0]), m).unwrap();
            let b = kq_expansion(&q30, m);
            assert!((a - b).norm() <= 1e-10, "m = {m}");
        }
        let q3 = factor_squarefree(3).unwrap();
        assert!(matches!(
            product_expansion(&q3, &d(&[0, 1, 2]), 0),
            Err(Error::ZeroDensity)
        ));
    }

    #[test]
    fn singular_series_examples() {
        let budget = TermBudget::default();
        let q3 = factor_squarefree(3).unwrap();
        let v = singular_series_expsum(&q3, &d(&[0, 2]), &budget).unwrap();
        assert!((v - Complex64::new(0.75, 0.0)).norm() < 1e-10);

        for n in [2u64, 15, 42] {
            let q = factor_squarefree(n).unwrap();
            let v = singular_series_expsum(&q, &d(&[0]), &budget).unwrap();
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-10, "q = {n}");
        }

        let q15 = factor_squarefree(15).unwrap();
        let v = singular_series_expsum(&q15, &d(&[0, 2]), &budget).unwrap();
        assert!((v.re - 45.0 / 64.0).abs() < 1e-8 && v.im.abs() < 1e-8);

        let tiny = TermBudget { max_terms: 10 };
        assert!(matches!(
            singular_series_expsum(&q15, &d(&[0, 2]), &tiny),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn representation_examples() {
        let budget = TermBudget::default();
        assert_eq!(
            representation_count(&[2, 6], FractionModOne::new(1, 2), &budget).unwrap(),
            2
        );
        assert_eq!(
            representation_count(&[3, 3], FractionModOne::new(2, 3), &budget).unwrap(),
            3
        );
        // Coprime moduli: CRT uniqueness, each representable target once.
        let hist = representation_histogram(&[2, 3], &budget).unwrap();
        assert!(hist.counts.iter().all(|&c| c <= 1));
        assert_eq!(hist.counts.iter().sum::<u64>(), 6);
    }

    #[test]
    fn constrained_product_sum_examples() {
        let budget = TermBudget::default();
        let r = constrained_product_sum(&[3, 3], 10, &budget).unwrap();
        assert_eq!(r.value, Rational::from_integer(18.into()));
        assert!(r.holds());

        let r = constrained_product_sum(&[2, 2], 1, &budget).unwrap();
        assert_eq!(r.value, Rational::from_integer(1.into()));
        assert!(r.holds());

        let r = constrained_product_sum(&[2, 3], 50, &budget).unwrap();
        assert_eq!(r.value, Rational::zero());
        assert_eq!(r.tuple_count, 0);
    }

    #[test]
    fn f_correlation_examples() {
        let c = f_correlation(2, 1);
        assert_eq!(c.value, Rational::from_integer(1.into()));
        assert!((c.ratio - 0.5).abs() < 1e-15);

        let c = f_correlation(3, 5);
        assert_eq!(c.value, Rational::from_integer(18.into()));
        assert!((c.ratio - 2.0).abs() < 1e-15);

        for q in [5u64, 8, 13] {
            let c = f_correlation(q, 1);
            assert_eq!(c.value, Rational::from_integer((q - 1).into()));
        }
    }

    #[test]
    fn f_correlation_scan_matches_exact_kernel() {
        // The O(1)-per-h scan and the exact enumeration are independent routes.
        for q in [7u64, 12, 100, 257] {
            for h in [1u64, 3, q / 2 + 1, q] {
                let exact = f_correlation(q, h);
                let (max1, _, _) = f_correlation_ratio_max(q, h);
                assert!(exact.ratio <= max1 + 1e-12, "q = {q}, h = {h}");
            }
        }
        // Exact spot value: the scan formula at (q, h) can be recovered by
        // restricting the grid to a single point via ratio comparison.
        let c = f_correlation(100, 10);
        let mut s = 0.0;
        for a in 1..100u64 {
            let f = window_envelope(FractionModOne::new(a as i64, 100), 10);
            s += f * f;
        }
        assert!((rational_to_f64(&c.value) - s).abs() < 1e-9);
    }

    #[test]
    fn expsum_envelope_on_dense_float_grid() {
        // Deterministic dense grid of real arguments alongside the rational
        // proptest: |E_h(x)| ≤ F(x, h) everywhere.
        for h in [1u64, 10, 100, 1000] {
            for i in 0..=997u64 {
                let x = i as f64 / 997.0;
                let e = window_expsum_f64(x, h).norm();
                let f = window_envelope_f64(x, h);
                assert!(e <= f + 1e-6, "x = {x}, h = {h}: |E| = {e}, F = {f}");
            }
        }
    }

    #[test]
    fn pinned_correlation_constant_reproduces() {
        // Deterministic scan; the pinned constant is its exact output.
        let (max, q, h) = f_correlation_ratio_max(2000, 2000);
        println!("C_F scan: max ratio {max:.14} at q = {q}, h = {h}");
        assert!((max - F_ENVELOPE_CORRELATION_MAX).abs() <= 1e-12);
    }

    proptest! {
        #[test]
        fn expsum_below_envelope(a in 0i64..1000, r in 1u64..1000, h in 1u64..1000) {
            let x = FractionModOne::new(a, r);
            let e = window_expsum(x, h).norm();
            let f = window_envelope(x, h);
            prop_assert!(e <= f + 1e-9, "x = {x}, h = {h}: |E| = {e}, F = {f}");
        }

        #[test]
        fn mu_within_trivial_bound(mask in 1u8..16, a in 1u64..10_000) {
            let offs: Vec<i64> = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| i as i64 * 3).collect();
            let dd = OffsetSet::new(offs).unwrap();
            let r = factor_squarefree(105).unwrap();
            let a = 1 + (a % 105);
            if arith::gcd(a, 105) == 1 {
                let profile = CharacterSumProfile::from_offsets(&r, &dd);
                let v = profile.mu(a).unwrap();
                let s = dd.s() as f64;
                prop_assert!(v.norm() <= s.powi(r.omega() as i32) + 1e-9);
                prop_assert!(v.norm() <= profile.trivial_bound() + 1e-9);
            }
        }

        #[test]
        fn representation_counts_are_zero_or_uniform(i in 0usize..64, j in 0usize..64, t in 0u64..10_000) {
            let divisors = [1u64, 2, 3, 5, 6, 10, 15, 30];
            let r1 = divisors[i % 8];
            let r2 = divisors[j % 8];
            let hist = representation_histogram(&[r1, r2], &TermBudget::default()).unwrap();
            let expected = r1 * r2 / hist.lcm;
            let idx = (t % hist.lcm) as usize;
            prop_assert!(hist.counts[idx] == 0 || hist.counts[idx] == expected);
        }
    }
}
