//! Gap statistics of tuple starts: the cyclic gap sequence, the power sums
//! `V_λ`, the tail count `L(x)`, and spacing diagnostics.
//!
//! Gaps are cyclic: the last gap wraps from the largest start back to the
//! first plus q, so the gaps always sum to exactly q and `V_1 = q`.

use crate::arith::SquarefreeModulus;
use crate::error::{Error, Result};
use crate::tuples::{OffsetSet, SieveBudget, TupleStartSieve};
use crate::{rational_to_f64, Rational};
use num_bigint::BigUint;
use num_traits::Zero;

/// `V_λ` is exact for integer λ and floating otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum VLambda {
    Exact(BigUint),
    Float(f64),
}

impl VLambda {
    pub fn as_f64(&self) -> f64 {
        match self {
            VLambda::Exact(v) => rational_to_f64(&Rational::from_integer(v.clone().into())),
            VLambda::Float(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            VLambda::Exact(v) => Some(v),
            VLambda::Float(_) => None,
        }
    }
}

/// Cyclic gap data for a pair (q, D).
#[derive(Debug, Clone)]
pub struct GapStatistics {
    pub q: u64,
    pub offsets: OffsetSet,
    /// Tuple starts `a_1 < a_2 < …` in [0, q).
    pub starts: Vec<u64>,
    /// Cyclic gaps `a_{i+1} − a_i`, ending with `a_1 + q − a_last`.
    pub gaps: Vec<u64>,
    /// Requested `(λ, V_λ)` pairs, in input order.
    pub v: Vec<(f64, VLambda)>,
}

impl GapStatistics {
    pub fn phi_d(&self) -> u64 {
        self.starts.len() as u64
    }

    /// Mean gap `q / φ_D(q)`.
    pub fn mean_gap(&self) -> f64 {
        self.q as f64 / self.starts.len() as f64
    }

    pub fn v_lambda(&self, lambda: f64) -> Option<&VLambda> {
        self.v.iter().find(|(l, _)| *l == lambda).map(|(_, v)| v)
    }
}

fn v_lambda_of_gaps(gaps: &[u64], lambda: f64) -> VLambda {
    if lambda >= 1.0 && lambda.fract() == 0.0 && lambda <= 64.0 {
        let k = lambda as u32;
        let mut sum = BigUint::zero();
        for &g in gaps {
            sum += BigUint::from(g).pow(k);
        }
        VLambda::Exact(sum)
    } else {
        VLambda::Float(gaps.iter().map(|&g| (g as f64).powf(lambda)).sum())
    }
}

/// Extracts starts and cyclic gaps from the tuple-start sieve and evaluates
/// `V_λ` for each requested λ ≥ 1.
pub fn gap_statistics(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    lambdas: &[f64],
    budget: &SieveBudget,
) -> Result<GapStatistics> {
    let sieve = TupleStartSieve::tuple_starts(q, d, budget)?;
    if sieve.popcount() == 0 {
        return Err(Error::EmptySet);
    }
    let starts = sieve.positions();
    let mut gaps = Vec::with_capacity(starts.len());
    for w in starts.windows(2) {
        gaps.push(w[1] - w[0]);
    }
    gaps.push(starts[0] + q.q() - starts[starts.len() - 1]);
    debug_assert_eq!(gaps.iter().sum::<u64>(), q.q());
    let v = lambdas
        .iter()
        .map(|&l| (l, v_lambda_of_gaps(&gaps, l)))
        .collect();
    Ok(GapStatistics {
        q: q.q(),
        offsets: d.clone(),
        starts,
        gaps,
        v,
    })
}

/// `L(x)`: the number of cyclic gaps strictly exceeding x. Nonincreasing and
/// right-continuous in x.
pub fn tail_count(stats: &GapStatistics, x: f64) -> u64 {
    stats.gaps.iter().filter(|&&g| g as f64 > x).count() as u64
}

/// Evaluates `λ ∫_0^∞ L(x) x^{λ−1} dx` discretely for integer λ: over the
/// distinct gap values `g_1 < … < g_m` (with g_0 = 0) the integral collapses
/// to `Σ_i #{gaps ≥ g_i} (g_i^λ − g_{i−1}^λ)`, which must equal `V_λ` exactly.
pub fn tail_integral_exact(stats: &GapStatistics, lambda: u32) -> BigUint {
    assert!(lambda >= 1);
    let mut distinct = stats.gaps.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut total = BigUint::zero();
    let mut prev = BigUint::zero();
    for &g in &distinct {
        let at_least = stats.gaps.iter().filter(|&&x| x >= g).count() as u64;
        let gl = BigUint::from(g).pow(lambda);
        total += BigUint::from(at_least) * (&gl - &prev);
        prev = gl;
    }
    total
}

/// `V_λ / (φ_D(q) P^{−sλ})`, the Erdős-style ratio tracked over monotone
/// families of moduli.
pub fn erdos_ratio(
    q: &SquarefreeModulus,
    d: &OffsetSet,
    lambda: f64,
    budget: &SieveBudget,
) -> Result<f64> {
    let stats = gap_statistics(q, d, &[lambda], budget)?;
    Ok(erdos_ratio_from(&stats, q, lambda))
}

/// Same ratio from precomputed statistics.
pub fn erdos_ratio_from(stats: &GapStatistics, q: &SquarefreeModulus, lambda: f64) -> f64 {
    let v = stats
        .v_lambda(lambda)
        .expect("lambda was requested")
        .as_f64();
    let p = q.phi() as f64 / q.q() as f64;
    let s = stats.offsets.s() as f64;
    let denom = stats.phi_d() as f64 * p.powf(-s * lambda);
    v / denom
}

/// Histogram of gaps normalized by the mean gap, with the Poisson reference
/// mass per bin. Diagnostic only; nothing is asserted against it.
#[derive(Debug, Clone)]
pub struct SpacingHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `e^{−a} − e^{−b}` per bin [a, b): the exponential-spacing reference.
    pub poisson_mass: Vec<f64>,
    pub mean_gap: f64,
}

pub fn spacing_histogram(stats: &GapStatistics, edges: &[f64]) -> Result<SpacingHistogram> {
    if stats.gaps.len() < 2 {
        return Err(Error::EmptySet);
    }
    assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]));
    let mean = stats.mean_gap();
    let mut counts = vec![0u64; edges.len() - 1];
    for &g in &stats.gaps {
        let t = g as f64 / mean;
        for i in 0..counts.len() {
            if t >= edges[i] && t < edges[i + 1] {
                counts[i] += 1;
                break;
            }
        }
    }
    let poisson_mass = edges
        .windows(2)
        .map(|w| (-w[0]).exp() - (-w[1]).exp())
        .collect();
    Ok(SpacingHistogram {
        edges: edges.to_vec(),
        counts,
        poisson_mass,
        mean_gap: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factor_squarefree;
    use crate::tuples::density;

    fn d(list: &[i64]) -> OffsetSet {
        OffsetSet::new(list.to_vec()).unwrap()
    }

    #[test]
    fn gap_examples() {
        let budget = SieveBudget::default();
        let q15 = factor_squarefree(15).unwrap();
        let st = gap_statistics(&q15, &d(&[0]), &[2.0], &budget).unwrap();
        assert_eq!(st.starts, vec![1, 2, 4, 7, 8, 11, 13, 14]);
        assert_eq!(st.gaps, vec![1, 2, 3, 1, 3, 2, 1, 2]);
        assert_eq!(
            st.v_lambda(2.0).unwrap().exact().unwrap(),
            &BigUint::from(33u32)
        );

        let q30 = factor_squarefree(30).unwrap();
        let st = gap_statistics(&q30, &d(&[0]), &[2.0], &budget).unwrap();
        assert_eq!(st.gaps, vec![6, 4, 2, 4, 2, 4, 6, 2]);
        assert_eq!(
            st.v_lambda(2.0).unwrap().exact().unwrap(),
            &BigUint::from(132u32)
        );

        // V_1 = q by the cyclic telescoping.
        for n in [2u64, 15, 30, 210] {
            let q = factor_squarefree(n).unwrap();
            let st = gap_statistics(&q, &d(&[0]), &[1.0], &budget).unwrap();
            assert_eq!(
                st.v_lambda(1.0).unwrap().exact().unwrap(),
                &BigUint::from(n)
            );
            assert_eq!(st.gaps.iter().sum::<u64>(), n);
            assert_eq!(st.phi_d(), density(&q, &d(&[0])).phi_d);
        }

        let q3 = factor_squarefree(3).unwrap();
        assert!(matches!(
            gap_statistics(&q3, &d(&[0, 1, 2]), &[2.0], &budget),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn tail_count_examples() {
        let budget = SieveBudget::default();
        let q15 = factor_squarefree(15).unwrap();
        let st = gap_statistics(&q15, &d(&[0]), &[], &budget).unwrap();
        assert_eq!(tail_count(&st, 2.5), 2);
        assert_eq!(tail_count(&st, 3.0), 0);
        assert_eq!(tail_count(&st, 0.5), st.phi_d());
        // L(x) ≤ φ_D and x·L(x) ≤ q for x ≥ 1.
        for x in [1.0f64, 1.5, 2.0, 2.9] {
            let l = tail_count(&st, x);
            assert!(l <= st.phi_d());
            assert!(x * l as f64 <= st.q as f64);
        }
    }

    #[test]
    fn tail_integral_identity() {
        let budget = SieveBudget::default();
        for n in [15u64, 30, 105, 2310] {
            let q = factor_squarefree(n).unwrap();
            for dd in [d(&[0]), d(&[0, 2])] {
                let st = gap_statistics(&q, &dd, &[1.0, 2.0, 3.0, 4.0], &budget).unwrap();
                for lambda in 1..=4u32 {
                    assert_eq!(
                        &tail_integral_exact(&st, lambda),
                        st.v_lambda(lambda as f64).unwrap().exact().unwrap(),
                        "q={n} D={dd} lambda={lambda}"
                    );
                }
            }
        }
    }

    #[test]
    fn erdos_ratio_examples() {
        let budget = SieveBudget::default();
        let q30 = factor_squarefree(30).unwrap();
        let r = erdos_ratio(&q30, &d(&[0]), 2.0, &budget).unwrap();
        assert!((r - 132.0 / 112.5).abs() < 1e-12);

        // λ = 1, s = 1 is the exact identity V_1/(φ P^{-1}) = 1.
        for n in [6u64, 30, 210] {
            let q = factor_squarefree(n).unwrap();
            let r = erdos_ratio(&q, &d(&[0]), 1.0, &budget).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }

        let q210 = factor_squarefree(210).unwrap();
        let r = erdos_ratio(&q210, &d(&[0, 2]), 2.0, &budget).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn spacing_histogram_normalizes_to_mean_one() {
        let budget = SieveBudget::default();
        let q15 = factor_squarefree(15).unwrap();
        let st = gap_statistics(&q15, &d(&[0]), &[], &budget).unwrap();
        assert!((st.mean_gap() - 15.0 / 8.0).abs() < 1e-12);
        let h = spacing_histogram(&st, &[0.0, 0.5, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), st.phi_d());
        let norm_mean: f64 = st
            .gaps
            .iter()
            .map(|&g| g as f64 / st.mean_gap())
            .sum::<f64>()
            / st.phi_d() as f64;
        assert!((norm_mean - 1.0).abs() < 1e-12);

        // Degenerate single-gap case: q = 2, D = {0} has one gap of 2.
        let q2 = factor_squarefree(2).unwrap();
        let st = gap_statistics(&q2, &d(&[0]), &[], &budget).unwrap();
        assert_eq!(st.gaps, vec![2]);
        assert!(spacing_histogram(&st, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fractional_lambda_uses_floats() {
        let budget = SieveBudget::default();
        let q30 = factor_squarefree(30).unwrap();
        let st = gap_statistics(&q30, &d(&[0]), &[1.5], &budget).unwrap();
        match st.v_lambda(1.5).unwrap() {
            VLambda::Float(v) => {
                let expect: f64 = st.gaps.iter().map(|&g| (g as f64).powf(1.5)).sum();
                assert!((v - expect).abs() < 1e-12);
            }
            VLambda::Exact(_) => panic!("fractional lambda must be floating"),
        }
    }
}
