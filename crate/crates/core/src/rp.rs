//! Relaxing a past release: tighten a whole cached write group from scale
//! `b_old` to `b_new < b_old`, paying only the budget difference.
//!
//! The tightening uses the gradual-release construction of Koufogiannis,
//! Han and Pappas ("Optimality of the Laplace mechanism in differential
//! privacy" / "Gradual release of sensitive data under differential
//! privacy"). Writing the old noise as `eta_old = eta_new + V`, where
//! `eta_new ~ Lap(b_new)` and `V` is 0 with probability `(b_new/b_old)^2`
//! and `Lap(b_old)` otherwise, makes `eta_old ~ Lap(b_old)`. Sampling
//! `eta_new` from its conditional law given `eta_old` therefore yields an
//! exact `Lap(b_new)` marginal that is coupled to the earlier release, and
//! the pair costs no more than a single release at `b_new`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cache::StrategyCache;
use crate::data::DataVector;
use crate::error::{Error, Result};
use crate::frt::MappedStrategy;
use crate::scalar::Scalar;
use crate::space::{AttributeSpace, NodeKey};

/// Conditional draw of the tighter noise given the looser one.
///
/// With probability `(b_new/b_old) * exp(-|eta_old| (1/b_new - 1/b_old))`
/// the noise is kept. Otherwise it is drawn from the density proportional to
/// `exp(-|eta|/b_new - |eta_old - eta|/b_old)`, which is piecewise
/// exponential on three intervals and sampled by inversion.
pub fn noise_down<R: Rng + ?Sized>(rng: &mut R, eta_old: f64, b_old: f64, b_new: f64) -> f64 {
    if b_new >= b_old {
        return eta_old;
    }
    let (a, c) = (1.0 / b_new, 1.0 / b_old);
    let keep = (b_new / b_old) * (-eta_old.abs() * (a - c)).exp();
    if rng.random::<f64>() < keep {
        return eta_old;
    }
    let sign = if eta_old < 0.0 { -1.0 } else { 1.0 };
    let e = eta_old.abs();
    // masses of eta < 0, 0 <= eta <= e, eta > e, all scaled by exp(c e)
    let decay = (-(a - c) * e).exp();
    let m1 = 1.0 / (a + c);
    let m2 = -(-(a - c) * e).exp_m1() / (a - c);
    let m3 = decay / (a + c);
    let u = rng.random::<f64>() * (m1 + m2 + m3);
    let v: f64 = 1.0 - rng.random::<f64>();
    let eta = if u < m1 {
        v.ln() / (a + c)
    } else if u < m1 + m2 {
        // truncated exponential on [0, e]
        let w = rng.random::<f64>();
        -(w * (-(a - c) * e).exp_m1()).ln_1p() / (a - c)
    } else {
        e - v.ln() / (a + c)
    };
    sign * eta
}

/// A past write group that contains the whole strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct RpPlan<T> {
    pub timestamp: u64,
    pub group: Vec<NodeKey>,
    pub group_l1: usize,
    pub b_old: T,
    pub b_new: T,
    /// `||A_j||_1 (1/b_new - 1/b_old)`; zero when the group is already at
    /// least as accurate as required.
    pub epsilon: T,
}

impl<T: Scalar> RpPlan<T> {
    pub fn is_free(&self) -> bool {
        self.b_old <= self.b_new
    }
}

/// Cheapest write group containing every row of the strategy, relaxed to
/// `target_b`. `None` when no single group covers the strategy.
pub fn estimate_privacy_budget<T: Scalar>(
    space: &AttributeSpace,
    cache: &StrategyCache<T>,
    rows: &[NodeKey],
    target_b: T,
) -> Option<RpPlan<T>> {
    let mut best: Option<RpPlan<T>> = None;
    for g in cache.group_by_timestamp() {
        if !rows.iter().all(|r| g.rows.contains(r)) {
            continue;
        }
        let l1 = space.l1_norm(&g.rows);
        let epsilon = if g.b <= target_b {
            T::zero()
        } else {
            T::lit(l1 as f64) / target_b - T::lit(l1 as f64) / g.b
        };
        if best.as_ref().is_none_or(|b| epsilon < b.epsilon) {
            best = Some(RpPlan { timestamp: g.t, group: g.rows, group_l1: l1, b_old: g.b, b_new: target_b, epsilon });
        }
    }
    best
}

/// Relaxes the group in place under a new timestamp and answers the
/// workload from the strategy rows only. The old noise is recovered from
/// the ground truth transiently and never stored.
pub fn answer_workload<T: Scalar>(
    cache: &mut StrategyCache<T>,
    space: &AttributeSpace,
    strategy: &MappedStrategy<T>,
    m: &DMatrix<T>,
    plan: &RpPlan<T>,
    x: &DataVector,
    rng_for: &dyn Fn(&NodeKey, u64) -> ChaCha8Rng,
) -> Result<(Vec<T>, u64)> {
    let t = cache.tick();
    let mut ys = Vec::with_capacity(plan.group.len());
    for key in &plan.group {
        let e = cache
            .get(key)
            .filter(|e| e.t == plan.timestamp)
            .ok_or_else(|| Error::Internal("relaxed group changed since estimation".into()))?;
        if plan.is_free() {
            ys.push(e.y);
        } else {
            let truth = x.sum_over(&space.cells(key)) as f64;
            let eta_old = e.y.as_f64() - truth;
            let eta = noise_down(&mut rng_for(key, t), eta_old, plan.b_old.as_f64(), plan.b_new.as_f64());
            ys.push(T::lit(truth + eta));
        }
    }
    if !plan.is_free() {
        cache.update(&plan.group, plan.b_new, &ys, t)?;
    }
    let y: Vec<T> = strategy
        .keys
        .iter()
        .map(|k| {
            let i = plan.group.iter().position(|g| g == k).expect("group covers the strategy");
            ys[i]
        })
        .collect();
    Ok(((m * DVector::from_vec(y)).iter().copied().collect(), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn equal_scales_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(noise_down(&mut rng, 3.25, 10.0, 10.0), 3.25);
    }

    #[test]
    fn tighter_noise_shrinks_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let mut abs_old = 0.0;
        let mut abs_new = 0.0;
        for _ in 0..n {
            let eta_old = 20.0 * crate::calibration::standard_laplace(&mut rng);
            let eta = noise_down(&mut rng, eta_old, 20.0, 10.0);
            abs_old += eta_old.abs();
            abs_new += eta.abs();
        }
        // E|Lap(b)| = b
        assert!((abs_old / n as f64 - 20.0).abs() < 0.6);
        assert!((abs_new / n as f64 - 10.0).abs() < 0.3);
    }
}
