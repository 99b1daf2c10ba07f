//! Cache-aware matrix mechanism: privacy-cost estimation with a free/paid
//! split of the strategy rows, and answering under a chosen plan.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cache::StrategyCache;
use crate::calibration::{sample_laplace, AccuracyOracle, PreparedCheck};
use crate::data::DataVector;
use crate::error::{Error, Result};
use crate::frt::MappedStrategy;
use crate::scalar::Scalar;
use crate::space::{AttributeSpace, NodeKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct SearchParams<T> {
    /// Smallest chargeable budget; caps the paid scale at `||A||_1 / phi`.
    pub phi: T,
    /// The continuous search stops once `hi - lo <= rel_tol * lo`.
    pub rel_tol: T,
}

impl<T: Scalar> Default for SearchParams<T> {
    fn default() -> Self {
        Self { phi: T::lit(1e-4), rel_tol: T::lit(1e-3) }
    }
}

/// Free/paid split of a strategy and the resulting budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CostPlan<T> {
    /// Strategy rows reused from the cache, with their cached scales.
    pub free: Vec<(usize, T)>,
    pub paid: Vec<usize>,
    pub b_paid: T,
    /// `||P||_1 / b_paid`, zero when nothing is paid.
    pub epsilon: T,
    pub paid_l1: usize,
    /// Scale and budget of the plan that ignores the cache.
    pub cacheless_b: T,
    pub cacheless_epsilon: T,
    /// The plan keeps the cacheless scale and only reuses rows at least as
    /// accurate as it; chosen when the searched plan turns out dearer.
    pub from_cacheless: bool,
}

impl<T: Scalar> CostPlan<T> {
    pub fn is_free(&self) -> bool {
        self.paid.is_empty()
    }
}

fn free_set<T: Scalar>(cached: &[Option<T>], b: T) -> Vec<Option<T>> {
    cached.iter().map(|s| s.filter(|&s| s <= b)).collect()
}

/// Largest scale in `[lo, hi]` passing the prepared check, to relative
/// tolerance. `lo` is taken to pass.
fn continuous_search<T: Scalar>(
    oracle: &AccuracyOracle<T>,
    prepared: &PreparedCheck<T>,
    mut lo: T,
    mut hi: T,
    hi_inclusive: bool,
    certified: Option<T>,
    params: &SearchParams<T>,
) -> T {
    if hi_inclusive && oracle.passes(prepared, hi) {
        return hi;
    }
    if let Some(c) = certified {
        if c > lo && c < hi && oracle.passes(prepared, c) {
            lo = c;
        }
    }
    while hi - lo > params.rel_tol * lo {
        let mid = (lo + hi) / T::lit(2.0);
        if oracle.passes(prepared, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn plan_for<T: Scalar>(
    strategy: &MappedStrategy<T>,
    free: &[Option<T>],
    b: T,
    cacheless: (T, T),
    from_cacheless: bool,
) -> CostPlan<T> {
    let paid: Vec<usize> = (0..free.len()).filter(|&j| free[j].is_none()).collect();
    let paid_l1 = strategy.l1_norm_of(&paid);
    let epsilon = if paid.is_empty() { T::zero() } else { T::lit(paid_l1 as f64) / b };
    CostPlan {
        free: free.iter().enumerate().filter_map(|(j, s)| s.map(|s| (j, s))).collect(),
        paid,
        b_paid: b,
        epsilon,
        paid_l1,
        cacheless_b: cacheless.0,
        cacheless_epsilon: cacheless.1,
        from_cacheless,
    }
}

/// Plan ignoring the cache.
pub fn cacheless_budget<T: Scalar>(
    strategy: &MappedStrategy<T>,
    oracle: &AccuracyOracle<T>,
    params: &SearchParams<T>,
) -> CostPlan<T> {
    estimate_privacy_budget(strategy, oracle, &vec![None; strategy.len()], params)
}

/// Searches the paid scale for a strategy whose rows may be cached at the
/// scales in `cached`.
///
/// First a bisection over the candidate scales (the analytic lower bound
/// and every larger cached scale) finds the largest candidate that passes
/// with all rows cached at or below it reused. A continuous bisection then
/// pushes the paid scale up to just below the next candidate, with the free
/// set held fixed.
///
/// The cacheless plan is searched on the same random draws. If the cached
/// plan comes out dearer, the cacheless scale is kept and only rows cached
/// at or below it are reused, which is never less accurate than paying for
/// them. The result therefore never costs more than the cacheless plan.
pub fn estimate_privacy_budget<T: Scalar>(
    strategy: &MappedStrategy<T>,
    oracle: &AccuracyOracle<T>,
    cached: &[Option<T>],
    params: &SearchParams<T>,
) -> CostPlan<T> {
    let n = strategy.len();
    assert_eq!(cached.len(), n, "one cache slot per strategy row");
    let b_top = T::lit(strategy.l1_norm() as f64) / params.phi;
    let b_low = match oracle.lower_bound() {
        Some(b) if b < b_top => b,
        _ => b_top,
    };

    let none = vec![None; n];
    let b_cl = continuous_search(
        oracle,
        &oracle.prepare(&none),
        b_low,
        b_top,
        true,
        oracle.certified_scale(&none),
        params,
    );
    let cacheless = (b_cl, T::lit(strategy.l1_norm() as f64) / b_cl);
    if cached.iter().all(Option::is_none) {
        return plan_for(strategy, &none, b_cl, cacheless, false);
    }

    let mut candidates: Vec<T> = cached.iter().flatten().copied().filter(|&s| s > b_low).collect();
    candidates.push(b_low);
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite scales"));
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if oracle.check(&free_set(cached, candidates[mid]), candidates[mid]) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_d = candidates[lo];
    let free = free_set(cached, b_d);
    let searched = if free.iter().all(Option::is_some) {
        plan_for(strategy, &free, b_d, cacheless, false)
    } else {
        let (upper, inclusive) = match candidates.get(lo + 1) {
            Some(&c) => (c, false),
            None => (b_top, true),
        };
        let prepared = oracle.prepare(&free);
        let b = continuous_search(oracle, &prepared, b_d, upper, inclusive, oracle.certified_scale(&free), params);
        plan_for(strategy, &free, b, cacheless, false)
    };

    let reuse = plan_for(strategy, &free_set(cached, b_cl), b_cl, cacheless, true);
    if searched.epsilon <= reuse.epsilon {
        searched
    } else {
        reuse
    }
}

/// Result of releasing a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Release<T> {
    pub responses: Vec<T>,
    pub timestamp: u64,
    /// Rows freshly perturbed and written to the cache.
    pub written: Vec<NodeKey>,
}

/// Perturbs the paid rows (and any proactive rows) at the plan's scale,
/// writes them to the cache under one new timestamp, and answers the
/// workload from paid plus reused free responses. Proactive rows are cached
/// only; they never feed the returned answer.
#[allow(clippy::too_many_arguments)]
pub fn answer_workload<T: Scalar>(
    cache: &mut StrategyCache<T>,
    space: &AttributeSpace,
    strategy: &MappedStrategy<T>,
    m: &DMatrix<T>,
    plan: &CostPlan<T>,
    x: &DataVector,
    proactive: &[NodeKey],
    rng_for: &dyn Fn(&NodeKey, u64) -> ChaCha8Rng,
) -> Result<Release<T>> {
    let t = cache.tick();
    let mut y = vec![T::zero(); strategy.len()];
    for &(j, _) in &plan.free {
        let e = cache
            .get(&strategy.keys[j])
            .ok_or_else(|| Error::Internal("free row vanished from the cache".into()))?;
        y[j] = e.y;
    }
    let mut written = Vec::new();
    let mut ys = Vec::new();
    if !plan.paid.is_empty() {
        for &j in &plan.paid {
            let key = &strategy.keys[j];
            let truth = T::from_count(x.sum_over(&strategy.cells[j]));
            y[j] = truth + sample_laplace(&mut rng_for(key, t), plan.b_paid);
            written.push(key.clone());
            ys.push(y[j]);
        }
        for key in proactive {
            let truth = T::from_count(x.sum_over(&space.cells(key)));
            written.push(key.clone());
            ys.push(truth + sample_laplace(&mut rng_for(key, t), plan.b_paid));
        }
        cache.update(&written, plan.b_paid, &ys, t)?;
    }
    let responses = (m * DVector::from_vec(y)).iter().copied().collect();
    Ok(Release { responses, timestamp: t, written })
}
