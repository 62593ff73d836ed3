//! Exact window moments `M_k^D(q, h)`, their k = 2 exponential-sum closed
//! form, binomial central moments via Stirling numbers, and evaluators for
//! the theoretical bound shapes.
//!
//! The direct side is exact: counts are scaled by the centering denominator
//! before centering, so the k-th moment is a ratio of big integers and the
//! only floating point in a direct/expsum comparison comes from the
//! exponential-sum route.

use crate::arith::SquarefreeModulus;
use crate::error::{Error, Result};
use crate::identities::{CharacterSumProfile, FractionModOne, TermBudget};
use crate::tuples::{density, OffsetSet, SieveBudget, TupleStartSieve};
use crate::{rational_to_f64, Rational};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

/// Largest moment order the direct sweep accepts. Residuals are q-scaled, so
/// k-th powers grow like (qh)^k; big integers keep this exact but there is no
/// use for higher orders here.
pub const MAX_MOMENT_ORDER: u32 = 8;

/// An exact k-th central moment of window counts.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMoment {
    pub q: u64,
    pub offsets: OffsetSet,
    pub h: u64,
    pub k: u32,
    /// `Σ_n (q·W(n) − h·φ_D(q))^k`.
    pub scaled_numerator: BigInt,
    /// `scaled_numerator / q^k`, the moment itself.
    pub value: Rational,
    /// Rounded reading of `value`.
    pub float_value: f64,
}

/// `Σ_w counts[w] · (w·den − num)^k`, the shared exact kernel behind every
/// centered second-moment and higher-moment sweep in the crate.
pub fn scaled_central_moment(counts: &[u64], num: &BigInt, den: &BigInt, k: u32) -> BigInt {
    let mut sum = BigInt::zero();
    for (w, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let resid = BigInt::from(w as u64) * den - num;
        sum += resid.pow(k) * BigInt::from(c);
    }
    sum
}

/// Exact central moment `Σ_w counts[w] · (w − center)^k` for a rational center.
pub fn central_moment_from_histogram(counts: &[u64], center: &Rational, k: u32) -> Rational {
    let num = scaled_central_moment(counts, center.numer(), center.denom(), k);
    Rational::new(num, center.denom().pow(k))
}

/// `M_k^D(q, h) = Σ_{n=0}^{q-1} (W(n) − h·φ_D(q)/q)^k`, exactly, via the
/// scaled-integer histogram kernel.
pub fn moment_direct(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    h: u64,
    k: u32,
    budget: &SieveBudget,
) -> Result<WindowMoment> {
    if !(1..=MAX_MOMENT_ORDER).contains(&k) {
        return Err(Error::PreconditionViolated(format!(
            "moment order k must lie in 1..={MAX_MOMENT_ORDER}, got {k}"
        )));
    }
    let sieve = TupleStartSieve::tuple_starts(q, d, budget)?;
    let counts = sieve.window_histogram(h);
    let num = BigInt::from(h) * BigInt::from(sieve.popcount());
    let den = BigInt::from(q.q());
    let scaled_numerator = scaled_central_moment(&counts, &num, &den, k);
    let value = Rational::new(scaled_numerator.clone(), den.pow(k));
    let float_value = rational_to_f64(&value);
    Ok(WindowMoment {
        q: q.q(),
        offsets: d.clone(),
        h,
        k,
        scaled_numerator,
        value,
        float_value,
    })
}

/// The k = 2 moment of window counts of integers avoiding, mod each p | q,
/// the class set `forbidden[i]`, via the exponential-sum closed form
/// `q c² Σ_{r|q, r>1} (∏_{p|r} A_p)^{-2} Σ_{(a,r)=1} |E_h(a/r) μ(a, r)|²`
/// where `A_p = p − |Ω_p|`, `c = ∏ A_p/p`, and the weight sets are `−Ω_p`.
pub fn class_variance_expsum(
    q: &SquarefreeModulus,
    forbidden: &[Vec<u64>],
    h: u64,
    budget: &TermBudget,
) -> Result<f64> {
    assert_eq!(forbidden.len(), q.primes().len());
    if q.q() as u128 > budget.max_terms {
        return Err(Error::BudgetExceeded {
            what: "expsum terms",
            required: q.q() as u128,
            budget: budget.max_terms,
        });
    }
    let mut allowed = Vec::with_capacity(forbidden.len());
    for (&p, cls) in q.primes().iter().zip(forbidden) {
        if cls.len() as u64 >= p {
            return Err(Error::ZeroDensity);
        }
        allowed.push(p - cls.len() as u64);
    }
    // Weight residues −ω mod p for each forbidden class ω.
    let weight_sets: Vec<Vec<u64>> = q
        .primes()
        .iter()
        .zip(forbidden)
        .map(|(&p, cls)| {
            let mut w: Vec<u64> = cls.iter().map(|&x| (p - x % p) % p).collect();
            w.sort_unstable();
            w.dedup();
            w
        })
        .collect();
    let mut total = 0.0f64;
    let mut comp = 0.0f64;
    for r in q.divisors() {
        if r.q() == 1 {
            continue;
        }
        let idx: Vec<usize> = r
            .primes()
            .iter()
            .map(|p| q.primes().iter().position(|qp| qp == p).unwrap())
            .collect();
        let sets: Vec<Vec<u64>> = idx.iter().map(|&i| weight_sets[i].clone()).collect();
        let profile = CharacterSumProfile::new(&r, &sets);
        let denom: f64 = idx.iter().map(|&i| allowed[i] as f64).product();
        let mut inner = 0.0f64;
        let mut inner_c = 0.0f64;
        for a in 1..r.q() {
            if crate::arith::gcd(a, r.q()) == 1 {
                let e = crate::identities::window_expsum(FractionModOne::new(a as i64, r.q()), h);
                let m = profile.mu(a)?;
                let term = (e * m).norm_sqr();
                // Kahan step
                let y = term - inner_c;
                let t = inner + y;
                inner_c = (t - inner) - y;
                inner = t;
            }
        }
        let term = inner / (denom * denom);
        let y = term - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    let c: f64 = q
        .primes()
        .iter()
        .zip(&allowed)
        .map(|(&p, &a)| a as f64 / p as f64)
        .product();
    Ok(q.q() as f64 * c * c * total)
}

/// `M_2^D(q, h)` through the k = 2 exponential-sum identity; must agree with
/// [`moment_direct`] at k = 2 to relative 1e−6.
pub fn moment_expsum_k2(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    h: u64,
    budget: &TermBudget,
) -> Result<f64> {
    if density(q, d).phi_d == 0 {
        return Err(Error::ZeroDensity);
    }
    let forbidden: Vec<Vec<u64>> = q
        .primes()
        .iter()
        .map(|&p| {
            let mut cls: Vec<u64> = d
                .offsets()
                .iter()
                .map(|&x| (-x).rem_euclid(p as i64) as u64)
                .collect();
            cls.sort_unstable();
            cls.dedup();
            cls
        })
        .collect();
    class_variance_expsum(q, &forbidden, h, budget)
}

/// Stirling number of the second kind S(r, t) by the triangular recurrence,
/// with S(0, 0) = 1 and S(r, 0) = 0 for r ≥ 1.
pub fn stirling2(r: u32, t: u32) -> BigUint {
    if t > r {
        return BigUint::zero();
    }
    if r == 0 {
        return BigUint::one();
    }
    if t == 0 {
        return BigUint::zero();
    }
    let mut row: Vec<BigUint> = vec![BigUint::zero(); r as usize + 1];
    row[0] = BigUint::one(); // row for r = 0
    for n in 1..=r {
        // In-place update right to left: S(n, t) = t·S(n−1, t) + S(n−1, t−1).
        for tt in (1..=n.min(r)).rev() {
            let prev = row[tt as usize].clone();
            row[tt as usize] = prev * BigUint::from(tt) + row[tt as usize - 1].clone();
        }
        row[0] = BigUint::zero();
    }
    row[t as usize].clone()
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut out = BigUint::one();
    for i in 0..k {
        out = out * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    out
}

/// Exact k-th central moment `μ_k(h, P) = E((X − hP)^k)` of a Binomial(h, P)
/// variable, by the Stirling-number expansion
/// `Σ_r C(k,r) (−hP)^{k−r} Σ_t C(h,t) S(r,t) t! P^t`.
pub fn binomial_moment(h: u64, p: &Rational, k: u32) -> Rational {
    let hp = Rational::from_integer(BigInt::from(h)) * p;
    let mut total = Rational::zero();
    for r in 0..=k {
        // E[X^r] through falling-factorial moments.
        let mut raw = Rational::zero();
        let mut t_fact = BigUint::one();
        for t in 0..=r.min(h as u32) {
            if t > 0 {
                t_fact *= BigUint::from(t);
            }
            let coeff = binomial(h, t as u64) * stirling2(r, t) * t_fact.clone();
            raw += Rational::from_integer(BigInt::from(coeff)) * crate::rational_pow(p, t);
        }
        let sign = if (k - r).is_multiple_of(2) {
            Rational::one()
        } else {
            -Rational::one()
        };
        total += Rational::from_integer(BigInt::from(binomial(k as u64, r as u64)))
            * sign
            * crate::rational_pow(&hp, k - r)
            * raw;
    }
    total
}

/// Which theoretical right side to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `q h^{k/2} P^{−2^{ks}+ks}`
    Lemma12,
    /// `q (h P^s)^{⌊k/2⌋} + q h P^s` (k even)
    Lemma21,
    /// `q (h P^s)^{⌊k/2⌋} + q h P^s + q h^{k/2} P_1^{−2^{ks}+ks} P_2^{sk}`
    /// with the y-split q = q_1 q_2 (k even, h > P^{−1})
    Lemma31,
    /// `q (h P^s)^{k/2}`, valid for `h < e^{1/(k P^{1/s})}`
    Thm42SmallH,
    /// `q h^{k/2} P^{sk − s²k/2}`
    Thm42General,
    /// `(h P)^{⌊k/2⌋} + h P`
    MvMuK,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Lemma12 => "lemma12",
            BoundKind::Lemma21 => "lemma21",
            BoundKind::Lemma31 => "lemma31",
            BoundKind::Thm42SmallH => "thm42_small_h",
            BoundKind::Thm42General => "thm42_general",
            BoundKind::MvMuK => "mv_mu_k",
        }
    }
}

/// Inputs for [`theoretical_bound`]. `p` overrides the density when no
/// modulus is involved (the MV binomial bound); otherwise it is derived
/// from `q`.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub q: Option<SquarefreeModulus>,
    pub h: u64,
    pub k: u32,
    pub s: u32,
    pub p: Option<Rational>,
    /// Split point for Lemma31; defaults to h^k + 1.
    pub y: Option<u128>,
    pub observed: Option<f64>,
}

/// One evaluated bound with the observed/bound ratio when an observation is
/// supplied. No implied constant is applied; ratios are what the pins track.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub kind: &'static str,
    pub q: Option<u64>,
    pub h: u64,
    pub k: u32,
    pub s: u32,
    pub y: Option<u128>,
    pub bound: f64,
    pub observed: Option<f64>,
    pub ratio: Option<f64>,
}

/// Evaluates the stated right side of the requested bound.
pub fn theoretical_bound(kind: BoundKind, params: &BoundParams) -> Result<BoundReport> {
    let h = params.h as f64;
    let k = params.k;
    let s = params.s;
    if h < 1.0 || s < 1 {
        return Err(Error::PreconditionViolated("need h ≥ 1 and s ≥ 1".into()));
    }
    let p_ratio = match (&params.p, &params.q) {
        (Some(p), _) => p.clone(),
        (None, Some(q)) => q.p_ratio(),
        (None, None) => {
            return Err(Error::PreconditionViolated(
                "either q or P must be supplied".into(),
            ))
        }
    };
    let p = rational_to_f64(&p_ratio);
    let qv = params.q.as_ref().map(|q| q.q());
    let need_q = |kind: &str| -> Result<f64> {
        qv.map(|q| q as f64)
            .ok_or_else(|| Error::PreconditionViolated(format!("{kind} needs the modulus q")))
    };
    let mut y_out = None;
    let bound = match kind {
        BoundKind::Lemma12 => {
            let q = need_q("lemma12")?;
            let exponent = (k as f64 * s as f64) - 2f64.powi((k * s) as i32);
            q * h.powf(k as f64 / 2.0) * p.powf(exponent)
        }
        BoundKind::Lemma21 => {
            if !k.is_multiple_of(2) {
                return Err(Error::PreconditionViolated("lemma21 needs k even".into()));
            }
            let q = need_q("lemma21")?;
            let hps = h * p.powi(s as i32);
            q * hps.powi((k / 2) as i32) + q * hps
        }
        BoundKind::Lemma31 => {
            if !k.is_multiple_of(2) {
                return Err(Error::PreconditionViolated("lemma31 needs k even".into()));
            }
            let qm = params.q.as_ref().ok_or(Error::PreconditionViolated(
                "lemma31 needs the modulus q".into(),
            ))?;
            let q = qm.q() as f64;
            if h * p <= 1.0 {
                return Err(Error::PreconditionViolated(format!(
                    "lemma31 needs h > P^-1; h = {}, P^-1 = {}",
                    params.h,
                    1.0 / p
                )));
            }
            let hk = (params.h as u128)
                .checked_pow(k)
                .ok_or(Error::PreconditionViolated(
                    "h^k overflows the split computation".into(),
                ))?;
            let y = params.y.unwrap_or(hk + 1);
            if y <= hk {
                return Err(Error::PreconditionViolated(format!(
                    "lemma31 needs y > h^k; y = {y}, h^k = {hk}"
                )));
            }
            y_out = Some(y);
            let (mut q1, mut phi1, mut q2, mut phi2) = (1f64, 1f64, 1f64, 1f64);
            for &pr in qm.primes() {
                if (pr as u128) <= y {
                    q1 *= pr as f64;
                    phi1 *= (pr - 1) as f64;
                } else {
                    q2 *= pr as f64;
                    phi2 *= (pr - 1) as f64;
                }
            }
            let p1 = phi1 / q1;
            let p2 = phi2 / q2;
            let hps = h * p.powi(s as i32);
            let exponent = (k as f64 * s as f64) - 2f64.powi((k * s) as i32);
            q * hps.powi((k / 2) as i32)
                + q * hps
                + q * h.powf(k as f64 / 2.0) * p1.powf(exponent) * p2.powi((s * k) as i32)
        }
        BoundKind::Thm42SmallH => {
            let q = need_q("thm42_small_h")?;
            let cutoff = (1.0 / (k as f64 * p.powf(1.0 / s as f64))).exp();
            if h >= cutoff {
                return Err(Error::PreconditionViolated(format!(
                    "thm42_small_h needs h < e^(1/(k P^(1/s))) = {cutoff:.6}, got h = {h}"
                )));
            }
            q * (h * p.powi(s as i32)).powf(k as f64 / 2.0)
        }
        BoundKind::Thm42General => {
            let q = need_q("thm42_general")?;
            let exponent = (s * k) as f64 - (s * s) as f64 * k as f64 / 2.0;
            q * h.powf(k as f64 / 2.0) * p.powf(exponent)
        }
        BoundKind::MvMuK => {
            let hp = h * p;
            hp.powi((k / 2) as i32) + hp
        }
    };
    if bound.is_nan() || bound <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "bound {} evaluated non-positive or non-finite: {bound}",
            kind.name()
        )));
    }
    Ok(BoundReport {
        kind: kind.name(),
        q: qv,
        h: params.h,
        k,
        s,
        y: y_out,
        bound,
        observed: params.observed,
        ratio: params.observed.map(|o| o / bound),
    })
}

/// Brute-force central moment of Binomial(h, P): `Σ_j C(h,j) P^j (1−P)^{h−j} (j−hP)^k`.
/// Exact; the independent oracle for [`binomial_moment`].
pub fn binomial_moment_bruteforce(h: u64, p: &Rational, k: u32) -> Rational {
    let hp = Rational::from_integer(BigInt::from(h)) * p;
    let one_minus = Rational::one() - p;
    let mut total = Rational::zero();
    for j in 0..=h {
        let prob = Rational::from_integer(BigInt::from(binomial(h, j)))
            * crate::rational_pow(p, j as u32)
            * crate::rational_pow(&one_minus, (h - j) as u32);
        let dev = Rational::from_integer(BigInt::from(j)) - &hp;
        total += prob * crate::rational_pow(&dev, k);
    }
    total
}

impl WindowMoment {
    /// Exact rationals serialize as "num/den".
    pub fn value_string(&self) -> String {
        format!("{}/{}", self.value.numer(), self.value.denom())
    }

    pub fn is_nonnegative(&self) -> bool {
        !self.value.is_negative()
    }
}
