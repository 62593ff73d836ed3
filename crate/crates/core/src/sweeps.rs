//! Parameter sweeps whose extremal ratios are the regression quantities.
//!
//! Order-of-growth bounds (≪/≫) hide constants depending on D, k, s and λ, so
//! nothing here asserts an absolute inequality. Each sweep measures the
//! extreme ratio over a fixed deterministic grid; `pin-oracle` freezes those
//! extremes into a manifest and regression runs re-measure against it. The
//! acceptance suite and the CLI call these same functions, so a pin always
//! measures exactly what the check asserts.

use crate::arith::{self, SquarefreeModulus};
use crate::error::Result;
use crate::gaps;
use crate::moments::{self, BoundKind, BoundParams};
use crate::pins::PinKind;
use crate::special_sets;
use crate::tuples::{OffsetSet, SieveBudget};
use crate::{rational_to_f64, Rational};

/// The extreme of one sweep, with where it occurred.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub key: String,
    pub kind: PinKind,
    pub value: f64,
    /// Grid description plus the arg-extreme, for the manifest.
    pub params: String,
}

/// Powers of two `1, 2, 4, …` up to and including `max`.
pub fn pow2_grid(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut h = 1u64;
    while h <= max {
        out.push(h);
        match h.checked_mul(2) {
            Some(next) => h = next,
            None => break,
        }
    }
    out
}

/// All squarefree moduli in `[2, q_max]`, ascending; odd only when asked.
pub fn squarefree_moduli(q_max: u64, odd_only: bool) -> Vec<SquarefreeModulus> {
    (2..=q_max)
        .filter(|n| !odd_only || n % 2 == 1)
        .filter_map(|n| arith::factor_squarefree(n).ok())
        .collect()
}

/// Max over odd squarefree q ≤ q_max and h in a log grid up to q of the
/// exact-centering square-count variance over `q h/(2^ω P)`.
pub fn thm02_exact_ratio_sweep(q_max: u64, budget: &SieveBudget) -> Result<SweepOutcome> {
    let mut best = (0.0f64, 0u64, 0u64);
    for q in squarefree_moduli(q_max, true) {
        let profile = special_sets::squares_profile(&q, budget)?;
        for h in pow2_grid(q.q()) {
            let rep = special_sets::thm02_check(&profile, h);
            if rep.ratio_exact > best.0 {
                best = (rep.ratio_exact, q.q(), h);
            }
        }
    }
    Ok(SweepOutcome {
        key: "thm02_exact_ratio_max".into(),
        kind: PinKind::Max,
        value: best.0,
        params: format!(
            "odd squarefree q <= {q_max}, h in pow2 grid up to q; extreme at q={}, h={}",
            best.1, best.2
        ),
    })
}

/// Max of the Erdős ratio `V_λ/(φ_D P^{-sλ})` over primorials with up to
/// `omega_max` prime factors.
pub fn erdos_ratio_sweep(
    omega_max: u32,
    d: &OffsetSet,
    lambda: f64,
    budget: &SieveBudget,
) -> Result<SweepOutcome> {
    let mut best = (0.0f64, 0u64);
    for q in arith::primorials(omega_max) {
        let stats = gaps::gap_statistics(&q, d, &[lambda], budget)?;
        let r = gaps::erdos_ratio_from(&stats, &q, lambda);
        if r > best.0 {
            best = (r, q.q());
        }
    }
    Ok(SweepOutcome {
        key: format!("erdos_ratio_max:d={d};lambda={lambda}"),
        kind: PinKind::Max,
        value: best.0,
        params: format!(
            "primorials omega <= {omega_max}, D = {{{d}}}, lambda = {lambda}; extreme at q={}",
            best.1
        ),
    })
}

/// Min of the Corollary-1 ratio over its default h grid at scale X.
pub fn corollary1_ratio_sweep(x: u64, budget: &SieveBudget) -> Result<SweepOutcome> {
    let report = special_sets::corollary1_experiment(x, None, budget)?;
    let mut best = (f64::INFINITY, 0u64);
    for row in &report.rows {
        if row.ratio < best.0 {
            best = (row.ratio, row.h);
        }
    }
    Ok(SweepOutcome {
        key: format!("corollary1_ratio_min:x={x}"),
        kind: PinKind::Min,
        value: best.0,
        params: format!(
            "X = {x}, q = {}, h grid halving from {}; extreme at h={}",
            report.q, report.h_cap, best.1
        ),
    })
}

/// The fixed primorial moment suite: q ∈ {6, 30, 210, 2310, 30030},
/// D = {0,2}, k ∈ {2,4}, h ∈ {⌈P⁻¹⌉, ⌈10 P⁻¹⌉}. Returns the max of
/// `moment_direct / bound` for the requested bound shape.
pub fn moment_bound_ratio_sweep(kind: BoundKind, budget: &SieveBudget) -> Result<SweepOutcome> {
    let d = OffsetSet::new(vec![0, 2]).expect("static offsets");
    let mut best = (0.0f64, String::new());
    for q in arith::primorials(6).into_iter().skip(1) {
        let p_inv = Rational::new(q.q().into(), q.phi().into());
        let h1 = rational_to_f64(&p_inv).ceil() as u64;
        let h2 = (10.0 * rational_to_f64(&p_inv)).ceil() as u64;
        for k in [2u32, 4] {
            for h in [h1, h2] {
                let m = moments::moment_direct(&q, &d, h, k, budget)?;
                let params = BoundParams {
                    q: Some(q.clone()),
                    h,
                    k,
                    s: d.s(),
                    p: None,
                    y: None,
                    observed: Some(m.float_value),
                };
                let rep = moments::theoretical_bound(kind, &params)?;
                let ratio = rep.ratio.expect("observed supplied");
                if ratio > best.0 {
                    best = (ratio, format!("q={}, h={h}, k={k}", q.q()));
                }
            }
        }
    }
    Ok(SweepOutcome {
        key: format!("moment_ratio_max:{};d=0,2", kind.name()),
        kind: PinKind::Max,
        value: best.0,
        params: format!(
            "primorials 6..=30030, D = {{0,2}}, k in {{2,4}}, h in {{ceil(1/P), ceil(10/P)}}; extreme at {}",
            best.1
        ),
    })
}

/// Keys of the pins the default manifest carries.
pub mod keys {
    pub const THM02_EXACT_RATIO_MAX: &str = "thm02_exact_ratio_max";
    pub const F_ENVELOPE_CORRELATION_MAX: &str = "f_envelope_correlation_max";

    pub fn erdos(d: &crate::tuples::OffsetSet, lambda: f64) -> String {
        format!("erdos_ratio_max:d={d};lambda={lambda}")
    }

    pub fn corollary1(x: u64) -> String {
        format!("corollary1_ratio_min:x={x}")
    }

    pub fn moment_ratio(kind: crate::moments::BoundKind) -> String {
        format!("moment_ratio_max:{};d=0,2", kind.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_grid_covers_range() {
        assert_eq!(pow2_grid(1), vec![1]);
        assert_eq!(pow2_grid(10), vec![1, 2, 4, 8]);
        assert_eq!(pow2_grid(16), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn squarefree_moduli_respects_parity() {
        let all = squarefree_moduli(30, false);
        assert!(all.iter().any(|q| q.q() == 30));
        assert!(all.iter().all(|q| arith::moebius(q.q()) != 0));
        let odd = squarefree_moduli(30, true);
        assert!(odd.iter().all(|q| q.q() % 2 == 1));
    }

    #[test]
    fn sweeps_run_on_small_grids() {
        let budget = SieveBudget::default();
        let out = thm02_exact_ratio_sweep(100, &budget).unwrap();
        assert!(out.value > 0.0 && out.value.is_finite());

        let d = OffsetSet::new(vec![0]).unwrap();
        let out = erdos_ratio_sweep(3, &d, 2.0, &budget).unwrap();
        assert!(out.value > 0.0);

        let out = corollary1_ratio_sweep(20, &budget).unwrap();
        assert!(out.value > 0.0 && out.value.is_finite());
    }
}
