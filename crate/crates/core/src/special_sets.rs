//! Special residue sets modulo squarefree q: squares (quadratic residues with
//! 0 glued in per prime), general per-prime class systems Ω_q with their Weyl
//! constants, and the badly-distributed D* construction with its lower-bound
//! statistic.
//!
//! Convention: a [`ResidueClassSystem`] stores the *forbidden* classes Ω_p;
//! the sieved set consists of the m avoiding every Ω_p. The character-sum
//! weights in the k = 2 identity then live on the negated sets −Ω_p.

use crate::arith::{self, SquarefreeModulus};
use crate::error::{Error, Result};
use crate::identities::{unit_phase, FractionModOne, TermBudget};
use crate::moments::{class_variance_expsum, scaled_central_moment};
use crate::tuples::{SieveBudget, TupleStartSieve};
use crate::{rational_to_f64, Rational};
use num_bigint::BigInt;
use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;

/// `{x² mod p : x ∈ [0, p)}`, sorted; includes 0, so its size is (p+1)/2.
pub fn quadratic_residues(p: u64) -> Vec<u64> {
    assert!(p % 2 == 1 && arith::is_prime(p), "p must be an odd prime");
    let mut out: Vec<u64> = (0..p).map(|x| x * x % p).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Quadratic non-residues mod an odd prime p: the (p−1)/2 classes outside
/// QR(p) ∪ {0}.
pub fn quadratic_non_residues(p: u64) -> Vec<u64> {
    let qr = quadratic_residues(p);
    (0..p).filter(|x| qr.binary_search(x).is_err()).collect()
}

/// `max_{a ∈ [1,p)} |Σ_{x ∈ classes} e(a x / p)| / √p`. An empty set gives 0.
pub fn weyl_constant(p: u64, classes: &[u64]) -> f64 {
    if classes.is_empty() {
        return 0.0;
    }
    let mut max = 0.0f64;
    for a in 1..p {
        let sum: Complex64 = classes
            .iter()
            .map(|&x| unit_phase(FractionModOne::from_wide(a as u128 * x as u128, p)))
            .sum();
        max = max.max(sum.norm());
    }
    max / (p as f64).sqrt()
}

/// Per-prime forbidden class sets Ω_p over a squarefree modulus, with their
/// densities c_p = |Ω_p|/p and (once computed) Weyl constants c′_p.
#[derive(Debug, Clone)]
pub struct ResidueClassSystem {
    modulus: SquarefreeModulus,
    classes: Vec<Vec<u64>>,
    weyl: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct ClassSystemDoc {
    primes: Vec<u64>,
    #[serde(default)]
    classes: BTreeMap<String, Vec<u64>>,
}

impl ResidueClassSystem {
    /// `classes[i]` lives modulo `modulus.primes()[i]` and must leave at
    /// least one allowed class (a full Ω_p kills the complement).
    pub fn new(modulus: SquarefreeModulus, classes: Vec<Vec<u64>>) -> Result<Self> {
        if classes.len() != modulus.primes().len() {
            return Err(Error::Parse(
                "one class set per prime of the modulus is required".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(classes.len());
        for (&p, cls) in modulus.primes().iter().zip(classes) {
            let mut c: Vec<u64> = cls;
            c.iter_mut().for_each(|x| *x %= p);
            c.sort_unstable();
            c.dedup();
            if c.len() as u64 >= p {
                return Err(Error::PreconditionViolated(format!(
                    "class set modulo {p} covers every residue"
                )));
            }
            normalized.push(c);
        }
        Ok(Self {
            modulus,
            classes: normalized,
            weyl: None,
        })
    }

    /// Loads `{"primes": [p, …], "classes": {"p": [x, …]}}`. Primes absent
    /// from `classes` get the empty set.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ClassSystemDoc =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut primes = doc.primes;
        primes.sort_unstable();
        let modulus = SquarefreeModulus::from_primes(primes.clone())?;
        for key in doc.classes.keys() {
            let p: u64 = key
                .parse()
                .map_err(|_| Error::Parse(format!("class key {key:?} is not an integer")))?;
            if !primes.contains(&p) {
                return Err(Error::Parse(format!("class key {p} is not a prime of q")));
            }
        }
        let classes = primes
            .iter()
            .map(|p| doc.classes.get(&p.to_string()).cloned().unwrap_or_default())
            .collect();
        Self::new(modulus, classes)
    }

    pub fn modulus(&self) -> &SquarefreeModulus {
        &self.modulus
    }

    pub fn classes(&self) -> &[Vec<u64>] {
        &self.classes
    }

    /// c_p = |Ω_p| / p for the i-th prime.
    pub fn c(&self, i: usize) -> Rational {
        Rational::new(
            BigInt::from(self.classes[i].len() as u64),
            BigInt::from(self.modulus.primes()[i]),
        )
    }

    /// `∏_p (p − |Ω_p|)/p`, the density of the sieved (avoiding) set.
    pub fn allowed_density(&self) -> Rational {
        let mut d = Rational::from_integer(1.into());
        for (i, &p) in self.modulus.primes().iter().enumerate() {
            d *= Rational::new(
                BigInt::from(p - self.classes[i].len() as u64),
                BigInt::from(p),
            );
        }
        d
    }

    /// `∏_p (p − |Ω_p|)`, the count of allowed residues per period.
    pub fn allowed_count(&self) -> u64 {
        self.modulus
            .primes()
            .iter()
            .zip(&self.classes)
            .map(|(&p, c)| p - c.len() as u64)
            .product()
    }

    pub fn weyl(&self) -> Option<&[f64]> {
        self.weyl.as_deref()
    }

    /// Computes and caches every c′_p by exhaustive scan over a ∈ [1, p).
    pub fn compute_weyl_constants(&mut self) -> &[f64] {
        if self.weyl.is_none() {
            let w = self
                .modulus
                .primes()
                .iter()
                .zip(&self.classes)
                .map(|(&p, cls)| weyl_constant(p, cls))
                .collect();
            self.weyl = Some(w);
        }
        self.weyl.as_deref().unwrap()
    }

    /// Sieve of m ∈ [0, q) avoiding every Ω_p.
    pub fn avoiding_sieve(&self, budget: &SieveBudget) -> Result<TupleStartSieve> {
        TupleStartSieve::avoiding_classes(&self.modulus, &self.classes, budget)
    }
}

/// Spec-level op: returns the system with c′_p filled in.
pub fn weyl_constants(system: &ResidueClassSystem) -> ResidueClassSystem {
    let mut s = system.clone();
    s.compute_weyl_constants();
    s
}

/// Squares modulo an odd squarefree q: membership sieve (m is a square mod
/// every p | q, with 0 counted as a square), the exact density
/// `∏ (p+1)/(2p)`, and the density prefactor `1/(2^ω P)` for comparison.
#[derive(Debug, Clone)]
pub struct SquaresProfile {
    pub modulus: SquarefreeModulus,
    pub member_sieve: TupleStartSieve,
    /// `∏ (p+1)/2`.
    pub count: u64,
    pub density_exact: Rational,
    pub density_paper: Rational,
}

/// Builds the squares profile. Errors with [`Error::EvenModulus`] when 2 | q:
/// every residue is a square mod 2 and the (p±1)/2 formulas presume odd p.
pub fn squares_profile(q: &SquarefreeModulus, budget: &SieveBudget) -> Result<SquaresProfile> {
    if q.primes().first() == Some(&2) {
        return Err(Error::EvenModulus);
    }
    let forbidden: Vec<Vec<u64>> = q
        .primes()
        .iter()
        .map(|&p| quadratic_non_residues(p))
        .collect();
    let member_sieve = TupleStartSieve::avoiding_classes(q, &forbidden, budget)?;
    let mut count = 1u64;
    let mut density_exact = Rational::from_integer(1.into());
    for &p in q.primes() {
        count *= p.div_ceil(2);
        density_exact *= Rational::new(BigInt::from(p + 1), BigInt::from(2 * p));
    }
    debug_assert_eq!(member_sieve.popcount(), count);
    let density_paper = Rational::new(
        BigInt::from(q.q()),
        BigInt::from(q.phi()) * BigInt::from(2u64).pow(q.omega()),
    );
    Ok(SquaresProfile {
        modulus: q.clone(),
        member_sieve,
        count,
        density_exact,
        density_paper,
    })
}

/// Which mean the square-count window is centered at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    /// The true mean `h ∏ (p+1)/(2p)`.
    Exact,
    /// The stated prefactor `h / (2^ω P)`; biased, kept as a diagnostic.
    Paper,
}

impl Centering {
    pub fn name(&self) -> &'static str {
        match self {
            Centering::Exact => "exact",
            Centering::Paper => "paper",
        }
    }
}

/// `Σ_{n mod q} (W_□(n) − h·c)²` exactly, where `W_□` is the cyclic window
/// count of square members and c the chosen centering density.
pub fn square_window_variance(profile: &SquaresProfile, h: u64, centering: Centering) -> Rational {
    let c = match centering {
        Centering::Exact => &profile.density_exact,
        Centering::Paper => &profile.density_paper,
    };
    let center = Rational::from_integer(BigInt::from(h)) * c;
    let counts = profile.member_sieve.window_histogram(h);
    let num = scaled_central_moment(&counts, center.numer(), center.denom(), 2);
    Rational::new(num, center.denom() * center.denom())
}

/// The exact-centering variance through the k = 2 exponential-sum identity;
/// the oracle partner of [`square_window_variance`] with [`Centering::Exact`].
pub fn square_window_variance_expsum(
    profile: &SquaresProfile,
    h: u64,
    budget: &TermBudget,
) -> Result<f64> {
    let forbidden: Vec<Vec<u64>> = profile
        .modulus
        .primes()
        .iter()
        .map(|&p| quadratic_non_residues(p))
        .collect();
    class_variance_expsum(&profile.modulus, &forbidden, h, budget)
}

/// Both centerings of the square-count variance against the right side
/// `q h / (2^ω P)`.
#[derive(Debug, Clone)]
pub struct Thm02Report {
    pub q: u64,
    pub h: u64,
    pub rhs: Rational,
    pub lhs_exact: Rational,
    pub lhs_paper: Rational,
    pub ratio_exact: f64,
    pub ratio_paper: f64,
}

pub fn thm02_check(profile: &SquaresProfile, h: u64) -> Thm02Report {
    let q = profile.modulus.q();
    let rhs = Rational::new(
        BigInt::from(q) * BigInt::from(q) * BigInt::from(h),
        BigInt::from(profile.modulus.phi()) * BigInt::from(2u64).pow(profile.modulus.omega()),
    );
    let lhs_exact = square_window_variance(profile, h, Centering::Exact);
    let lhs_paper = square_window_variance(profile, h, Centering::Paper);
    let rhs_f = rational_to_f64(&rhs);
    Thm02Report {
        q,
        h,
        ratio_exact: rational_to_f64(&lhs_exact) / rhs_f,
        ratio_paper: rational_to_f64(&lhs_paper) / rhs_f,
        rhs,
        lhs_exact,
        lhs_paper,
    }
}

/// The general class-system variance against `q h ∏((1−c_p)² + c′_p²)`.
#[derive(Debug, Clone)]
pub struct Thm41Report {
    pub q: u64,
    pub h: u64,
    pub lhs: Rational,
    pub rhs: f64,
    pub ratio: f64,
    pub weyl: Vec<f64>,
}

/// Computes the exact windowed variance of the avoiding set and the Weyl-form
/// right side. The ratio is ≤ 1 whenever the c′_p are the exhaustive maxima.
pub fn thm41_check(
    system: &ResidueClassSystem,
    h: u64,
    budget: &SieveBudget,
) -> Result<Thm41Report> {
    let mut sys = system.clone();
    sys.compute_weyl_constants();
    let weyl = sys.weyl().unwrap().to_vec();
    let sieve = sys.avoiding_sieve(budget)?;
    let center = Rational::from_integer(BigInt::from(h)) * sys.allowed_density();
    let counts = sieve.window_histogram(h);
    let num = scaled_central_moment(&counts, center.numer(), center.denom(), 2);
    let lhs = Rational::new(num, center.denom() * center.denom());
    let q = sys.modulus().q();
    let mut rhs = q as f64 * h as f64;
    for (i, &cp) in weyl.iter().enumerate() {
        let c = rational_to_f64(&sys.c(i));
        rhs *= (1.0 - c) * (1.0 - c) + cp * cp;
    }
    Ok(Thm41Report {
        q,
        h,
        ratio: rational_to_f64(&lhs) / rhs,
        lhs,
        rhs,
        weyl,
    })
}

/// The D* construction: per prime, the even-step classes `{0, 2, …, p−1}`
/// (that is (p+1)/2 classes), plus the sieves of members and avoiders.
#[derive(Debug, Clone)]
pub struct DstarSystem {
    /// Ω_p = D*_p as a forbidden-class system (its avoiders are the statistic).
    pub system: ResidueClassSystem,
    /// m ∈ [0, q) with m mod p ∈ D*_p for every p.
    pub member_sieve: TupleStartSieve,
    /// m ∈ [0, q) with m mod p ∉ D*_p for every p.
    pub complement_sieve: TupleStartSieve,
    /// `∏ (p−1)/(2p) = P / 2^ω`, exactly.
    pub complement_density: Rational,
}

/// `D*_p = {0, 2, 4, …, p−1}` for each odd p | q.
pub fn dstar_classes(p: u64) -> Vec<u64> {
    assert!(p % 2 == 1);
    (0..=(p - 1) / 2).map(|j| 2 * j).collect()
}

pub fn dstar_system(q: &SquarefreeModulus, budget: &SieveBudget) -> Result<DstarSystem> {
    if q.primes().first() == Some(&2) {
        return Err(Error::EvenModulus);
    }
    let dstar: Vec<Vec<u64>> = q.primes().iter().map(|&p| dstar_classes(p)).collect();
    let complement: Vec<Vec<u64>> = q
        .primes()
        .iter()
        .zip(&dstar)
        .map(|(&p, d)| (0..p).filter(|x| d.binary_search(x).is_err()).collect())
        .collect();
    let member_sieve = TupleStartSieve::avoiding_classes(q, &complement, budget)?;
    let complement_sieve = TupleStartSieve::avoiding_classes(q, &dstar, budget)?;
    let system = ResidueClassSystem::new(q.clone(), dstar)?;
    let complement_density = Rational::new(
        BigInt::from(q.phi()),
        BigInt::from(q.q()) * BigInt::from(2u64).pow(q.omega()),
    );
    debug_assert_eq!(complement_density, system.allowed_density());
    Ok(DstarSystem {
        system,
        member_sieve,
        complement_sieve,
        complement_density,
    })
}

/// One h of the Corollary-1 statistic.
#[derive(Debug, Clone)]
pub struct Corollary1Row {
    pub h: u64,
    /// `h P / 2^ω`, the expected window count of avoiders.
    pub expected: f64,
    /// `Σ_n (W(n) − h P/2^ω)²`, exact.
    pub statistic: Rational,
    /// `q (h P / 2^ω)²`, exact.
    pub bound: Rational,
    pub ratio: f64,
}

/// The deterministic Corollary-1 experiment for a scale X.
#[derive(Debug, Clone)]
pub struct Corollary1Report {
    pub x: u64,
    pub primes: Vec<u64>,
    pub q: u64,
    pub h_cap: u64,
    pub rows: Vec<Corollary1Row>,
}

/// Builds q from ⌊ln X⌋ primes in (X, 2X) — the closest-gap adjacent pair
/// first, then the smallest remaining — and sweeps the windowed variance of
/// the D*-avoiding set over a halving h-grid from ⌊X²/ln X⌋ down to the last
/// h with expected count ≥ 1. A fixed h may be supplied instead.
pub fn corollary1_experiment(
    x: u64,
    h: Option<u64>,
    budget: &SieveBudget,
) -> Result<Corollary1Report> {
    assert!(x >= 10);
    let ln_x = (x as f64).ln();
    let needed = ln_x.floor() as usize;
    let in_range = arith::primes_in_range(x + 1, 2 * x - 1);
    if in_range.len() < needed || needed < 2 {
        return Err(Error::InsufficientPrimes {
            needed: needed.max(2),
            found: in_range.len(),
        });
    }
    let (mut best_gap, mut best_i) = (u64::MAX, 0usize);
    for i in 0..in_range.len() - 1 {
        let gap = in_range[i + 1] - in_range[i];
        if gap < best_gap {
            best_gap = gap;
            best_i = i;
        }
    }
    if best_gap as f64 > 2.0 * ln_x {
        return Err(Error::PreconditionViolated(format!(
            "closest prime gap {best_gap} in ({x}, {}) exceeds 2 ln X = {:.3}",
            2 * x,
            2.0 * ln_x
        )));
    }
    let mut primes = vec![in_range[best_i], in_range[best_i + 1]];
    for &p in &in_range {
        if primes.len() >= needed {
            break;
        }
        if !primes.contains(&p) {
            primes.push(p);
        }
    }
    primes.sort_unstable();
    let q = SquarefreeModulus::from_primes(primes.clone())?;
    let dstar = dstar_system(&q, budget)?;
    let density = rational_to_f64(&dstar.complement_density);
    let h_cap = ((x * x) as f64 / ln_x).floor() as u64;
    let grid: Vec<u64> = match h {
        Some(h) => vec![h],
        None => {
            let mut g = Vec::new();
            let mut cur = h_cap;
            while cur >= 1 && cur as f64 * density >= 1.0 {
                g.push(cur);
                cur /= 2;
            }
            g.reverse();
            g
        }
    };
    let mut rows = Vec::with_capacity(grid.len());
    for h in grid {
        let center = Rational::from_integer(BigInt::from(h)) * &dstar.complement_density;
        let counts = dstar.complement_sieve.window_histogram(h);
        let num = scaled_central_moment(&counts, center.numer(), center.denom(), 2);
        let statistic = Rational::new(num, center.denom() * center.denom());
        let bound = Rational::from_integer(BigInt::from(q.q())) * &center * &center;
        let ratio = rational_to_f64(&statistic) / rational_to_f64(&bound);
        rows.push(Corollary1Row {
            h,
            expected: h as f64 * density,
            statistic,
            bound,
            ratio,
        });
    }
    Ok(Corollary1Report {
        x,
        primes,
        q: q.q(),
        h_cap,
        rows,
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A deterministic scrambled class system with |Ω_p| = ⌊p·num/den⌋: classes
/// are drawn by a splitmix64 stream keyed only by p, so corpora are
/// reproducible with no seed plumbing.
pub fn synthetic_class_system(
    q: &SquarefreeModulus,
    num: u64,
    den: u64,
) -> Result<ResidueClassSystem> {
    assert!(den > 0 && num * 2 <= den, "density must be at most 1/2");
    let classes = q
        .primes()
        .iter()
        .map(|&p| {
            let m = (p as u128 * num as u128 / den as u128) as u64;
            let mut state = p.wrapping_mul(0x9e3779b97f4a7c15) ^ 0xd1b54a32d192ed03;
            let mut set = std::collections::BTreeSet::new();
            while (set.len() as u64) < m {
                set.insert(splitmix64(&mut state) % p);
            }
            set.into_iter().collect()
        })
        .collect();
    ResidueClassSystem::new(q.clone(), classes)
}
