//! End-to-end workload processing with a shared privacy ledger.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheSnapshot, CacheStats, StrategyCache};
use crate::calibration::{AccuracyOracle, McConfig};
use crate::data::{Dataset, VectorRegistry};
use crate::error::{Error, Result};
use crate::frt::MappedStrategy;
use crate::linalg::pinv;
use crate::mmm::{self, CostPlan, SearchParams};
use crate::query::{AccuracyRequirement, RangeQuery, WorkloadRequest};
use crate::rp::{self, RpPlan};
use crate::scalar::Scalar;
use crate::schema::{attr_set, AttrSet};
use crate::space::{AttributeSpace, ExportNode, NodeKey};
use crate::{pq, se};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct EngineConfig<T> {
    pub total_budget: T,
    pub seed: u64,
    pub k_arity: usize,
    pub mc_samples: usize,
    pub phi: T,
    pub se_limit: usize,
    /// Reuse cached rows as free rows. Off means every estimate ignores the cache.
    pub enable_mmm: bool,
    pub enable_se: bool,
    pub enable_pq: bool,
    pub enable_rp: bool,
}

impl<T: Scalar> Default for EngineConfig<T> {
    fn default() -> Self {
        Self {
            total_budget: T::one(),
            seed: 0,
            k_arity: 2,
            mc_samples: McConfig::default().mc_samples,
            phi: SearchParams::<T>::default().phi,
            se_limit: se::DEFAULT_LIMIT,
            enable_mmm: true,
            enable_se: true,
            enable_pq: true,
            enable_rp: true,
        }
    }
}

impl<T: Scalar> EngineConfig<T> {
    /// Plain matrix mechanism: every workload paid in full at its own scale.
    pub fn cacheless(total_budget: T, seed: u64) -> Self {
        Self {
            total_budget,
            seed,
            enable_mmm: false,
            enable_se: false,
            enable_pq: false,
            enable_rp: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_arity < 2 {
            return Err(Error::InvalidRequest("k_arity must be at least 2".into()));
        }
        if self.mc_samples < McConfig::MIN_SAMPLES {
            return Err(Error::InvalidRequest(format!("mc_samples must be at least {}", McConfig::MIN_SAMPLES)));
        }
        if !(self.phi > T::zero()) || self.total_budget < T::zero() {
            return Err(Error::InvalidRequest("phi must be positive and total_budget non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    /// Answered from the cache at zero cost.
    Free,
    #[serde(rename = "MMM")]
    Mmm,
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "RP")]
    Rp,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Free => "Free",
            Self::Mmm => "MMM",
            Self::Se => "SE",
            Self::Rp => "RP",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LedgerEntry<T> {
    pub id: u64,
    pub mechanism: Mechanism,
    pub epsilon: T,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BudgetLedger<T> {
    total: T,
    consumed: T,
    log: Vec<LedgerEntry<T>>,
}

impl<T: Scalar> BudgetLedger<T> {
    pub fn new(total: T) -> Self {
        Self { total, consumed: T::zero(), log: Vec::new() }
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn consumed(&self) -> T {
        self.consumed
    }

    pub fn remaining(&self) -> T {
        self.total - self.consumed
    }

    pub fn log(&self) -> &[LedgerEntry<T>] {
        &self.log
    }

    /// Accepted charges in order.
    pub fn history(&self) -> impl Iterator<Item = &LedgerEntry<T>> {
        self.log.iter().filter(|e| e.accepted)
    }

    /// A paid charge is refused when it would bring consumption to or past
    /// the total. Free answers are always admitted.
    pub fn would_admit(&self, epsilon: T) -> bool {
        epsilon <= T::zero() || self.consumed + epsilon < self.total
    }

    fn record(&mut self, id: u64, mechanism: Mechanism, epsilon: T) -> bool {
        let accepted = self.would_admit(epsilon);
        if accepted {
            self.consumed += epsilon;
        }
        self.log.push(LedgerEntry { id, mechanism, epsilon, accepted });
        accepted
    }
}

/// Budgets estimated for one workload; `None` when a module did not run or
/// does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Estimates<T> {
    pub mmm: T,
    pub se: Option<T>,
    pub rp: Option<T>,
    pub cacheless: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Answer<T> {
    pub id: u64,
    pub responses: Vec<T>,
    pub epsilon: T,
    pub mechanism: Mechanism,
    pub free_rows: usize,
    pub paid_rows: usize,
    pub timestamp: u64,
    #[serde(skip)]
    pub estimates: Estimates<T>,
    /// Extra rows cached alongside the paid rows.
    #[serde(skip)]
    pub proactive_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Rejection<T> {
    pub id: u64,
    pub required_epsilon: T,
    pub remaining_budget: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Answered(Answer<T>),
    Rejected(Rejection<T>),
}

impl<T: Scalar> Outcome<T> {
    pub fn answer(&self) -> Option<&Answer<T>> {
        match self {
            Self::Answered(a) => Some(a),
            Self::Rejected(_) => None,
        }
    }

    /// Budget actually charged.
    pub fn charged(&self) -> T {
        self.answer().map_or(T::zero(), |a| a.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EngineSnapshot<T> {
    pub version: u32,
    pub next_id: u64,
    pub ledger: BudgetLedger<T>,
    pub caches: Vec<(AttrSet, CacheSnapshot<T>)>,
}

/// Strategy with its mapped workload and accuracy oracle.
struct Prepared<T> {
    strategy: MappedStrategy<T>,
    m: DMatrix<T>,
    oracle: AccuracyOracle<T>,
}

enum Choice<T> {
    Mmm(CostPlan<T>),
    Se(Box<Prepared<T>>, CostPlan<T>),
    Rp(RpPlan<T>),
}

fn hash_of(parts: impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    h.finish()
}

fn requirement_bits<T: Scalar>(r: &AccuracyRequirement<T>) -> (u8, u64, u64) {
    match *r {
        AccuracyRequirement::WorstError { alpha, beta } => (0, alpha.as_f64().to_bits(), beta.as_f64().to_bits()),
        AccuracyRequirement::ExpectedSquaredError { alpha_sq } => (1, alpha_sq.as_f64().to_bits(), 0),
    }
}

pub struct Engine<T> {
    config: EngineConfig<T>,
    params: SearchParams<T>,
    dataset: Arc<Dataset>,
    vectors: VectorRegistry,
    spaces: BTreeMap<AttrSet, Arc<AttributeSpace>>,
    caches: BTreeMap<AttrSet, StrategyCache<T>>,
    ledger: BudgetLedger<T>,
    next_id: u64,
}

impl<T: Scalar> Engine<T> {
    pub fn new(config: EngineConfig<T>, dataset: Arc<Dataset>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: SearchParams { phi: config.phi, ..SearchParams::default() },
            ledger: BudgetLedger::new(config.total_budget),
            config,
            dataset,
            vectors: VectorRegistry::default(),
            spaces: BTreeMap::new(),
            caches: BTreeMap::new(),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig<T> {
        &self.config
    }

    pub fn ledger(&self) -> &BudgetLedger<T> {
        &self.ledger
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Clears caches and ledger and reseeds all random streams.
    pub fn reset(&mut self, seed: u64, total_budget: T) {
        self.config.seed = seed;
        self.config.total_budget = total_budget;
        self.caches.clear();
        self.ledger = BudgetLedger::new(total_budget);
        self.next_id = 0;
    }

    pub fn space(&mut self, attrs: &AttrSet) -> Result<Arc<AttributeSpace>> {
        if let Some(s) = self.spaces.get(attrs) {
            return Ok(s.clone());
        }
        let s = Arc::new(AttributeSpace::new(self.dataset.schema(), attrs, self.config.k_arity)?);
        self.spaces.insert(attrs.clone(), s.clone());
        Ok(s)
    }

    pub fn cache(&self, attrs: &AttrSet) -> Option<&StrategyCache<T>> {
        self.caches.get(attrs)
    }

    pub fn tree(&mut self, attrs: &AttrSet) -> Result<Vec<ExportNode>> {
        Ok(self.space(attrs)?.export_tree())
    }

    /// Statistics for the cache of `attrs`; empty when nothing was answered yet.
    pub fn cache_stats(&mut self, attrs: &AttrSet) -> Result<CacheStats<T>> {
        let space = self.space(attrs)?;
        Ok(match self.caches.get(attrs) {
            Some(c) => c.stats(),
            None => StrategyCache::<T>::new(space.node_count()).stats(),
        })
    }

    pub fn snapshot(&self) -> EngineSnapshot<T> {
        EngineSnapshot {
            version: SNAPSHOT_VERSION,
            next_id: self.next_id,
            ledger: self.ledger.clone(),
            caches: self.caches.iter().map(|(a, c)| (a.clone(), c.snapshot())).collect(),
        }
    }

    pub fn restore(&mut self, snap: EngineSnapshot<T>) -> Result<()> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::InvalidRequest(format!("unsupported snapshot version {}", snap.version)));
        }
        let mut caches = BTreeMap::new();
        for (attrs, c) in snap.caches {
            let space = self.space(&attrs)?;
            let cache = StrategyCache::restore(c)?;
            if cache.iter().any(|(k, _)| !space.contains_key(k)) {
                return Err(Error::InvalidRequest(format!("snapshot rows outside the strategy of {attrs:?}")));
            }
            caches.insert(attrs, cache);
        }
        self.config.total_budget = snap.ledger.total();
        self.caches = caches;
        self.ledger = snap.ledger;
        self.next_id = snap.next_id;
        Ok(())
    }

    /// Checks a request and rewrites its intervals into sorted-attribute order.
    fn normalize(&mut self, req: &WorkloadRequest<T>) -> Result<(AttrSet, Arc<AttributeSpace>, Vec<RangeQuery>)> {
        req.accuracy.validate()?;
        if req.queries.is_empty() {
            return Err(Error::InvalidRequest("workload has no queries".into()));
        }
        let attrs = attr_set(&req.attributes);
        if attrs.len() != req.attributes.len() {
            return Err(Error::InvalidRequest("attribute listed twice".into()));
        }
        let space = self.space(&attrs)?;
        let perm: Vec<usize> = attrs
            .iter()
            .map(|a| req.attributes.iter().position(|b| b == a).expect("attribute from the request"))
            .collect();
        let mut queries = Vec::with_capacity(req.queries.len());
        for (i, q) in req.queries.iter().enumerate() {
            if q.0.len() != perm.len() {
                return Err(Error::InvalidQuery {
                    index: i,
                    reason: format!("expected {} intervals, got {}", perm.len(), q.0.len()),
                });
            }
            let q = RangeQuery(perm.iter().map(|&p| q.0[p]).collect());
            space.validate_query(i, &q)?;
            queries.push(q);
        }
        Ok((attrs, space, queries))
    }

    fn prepare(
        &self,
        attrs: &AttrSet,
        space: &AttributeSpace,
        rows: Vec<NodeKey>,
        queries: &[RangeQuery],
        accuracy: &AccuracyRequirement<T>,
    ) -> Prepared<T> {
        // The Monte Carlo stream depends only on what is being calibrated, so
        // re-estimating the same workload reproduces the same decision.
        let seed = hash_of((
            self.config.seed,
            "calibration",
            attrs,
            &rows,
            queries,
            requirement_bits(accuracy),
            self.config.mc_samples,
        ));
        let strategy = MappedStrategy::build(space, rows);
        let w_cells: Vec<Vec<usize>> = queries.iter().map(|q| space.box_cells(&q.0)).collect();
        let w = strategy.map_rows(&w_cells);
        let m: DMatrix<T> = &w * pinv(&strategy.a);
        let oracle = AccuracyOracle::new(m.clone(), *accuracy, McConfig { mc_samples: self.config.mc_samples, seed });
        Prepared { strategy, m, oracle }
    }

    fn cached_scales(&self, cache: &StrategyCache<T>, keys: &[NodeKey]) -> Vec<Option<T>> {
        if self.config.enable_mmm {
            cache.scales(keys)
        } else {
            vec![None; keys.len()]
        }
    }

    /// Runs one workload: estimate every enabled mechanism, pick the cheapest
    /// (ties favour MMM, then SE, then RP), enforce the budget, answer.
    pub fn process(&mut self, req: &WorkloadRequest<T>) -> Result<Outcome<T>> {
        let (attrs, space, queries) = self.normalize(req)?;
        let rows = space.generate_strategy(&queries)?;
        let x = self.vectors.get(&self.dataset, &attrs)?;
        let id = self.next_id;
        self.next_id += 1;

        let base = self.prepare(&attrs, &space, rows.clone(), &queries, &req.accuracy);
        let empty = StrategyCache::new(space.node_count());
        let cache = self.caches.get(&attrs).unwrap_or(&empty);
        let mmm_plan = mmm::estimate_privacy_budget(
            &base.strategy,
            &base.oracle,
            &self.cached_scales(cache, &base.strategy.keys),
            &self.params,
        );
        let mut estimates = Estimates {
            mmm: mmm_plan.epsilon,
            se: None,
            rp: None,
            cacheless: mmm_plan.cacheless_epsilon,
        };

        let mut se_choice = None;
        let mut rp_choice = None;
        if mmm_plan.epsilon > T::zero() {
            if self.config.enable_se {
                let expanded =
                    se::generate_expanded_strategy(&space, &rows, cache, mmm_plan.b_paid, self.config.se_limit);
                if expanded.len() > rows.len() {
                    let prep = self.prepare(&attrs, &space, expanded, &queries, &req.accuracy);
                    let plan = mmm::estimate_privacy_budget(
                        &prep.strategy,
                        &prep.oracle,
                        &self.cached_scales(cache, &prep.strategy.keys),
                        &self.params,
                    );
                    estimates.se = Some(plan.epsilon);
                    se_choice = Some((Box::new(prep), plan));
                }
            }
            if self.config.enable_rp {
                rp_choice = rp::estimate_privacy_budget(&space, cache, &rows, mmm_plan.cacheless_b);
                estimates.rp = rp_choice.as_ref().map(|p| p.epsilon);
            }
        }

        let mut best = mmm_plan.epsilon;
        let mut choice = Choice::Mmm(mmm_plan);
        if let Some((prep, plan)) = se_choice {
            if plan.epsilon < best {
                best = plan.epsilon;
                choice = Choice::Se(prep, plan);
            }
        }
        if let Some(plan) = rp_choice {
            if plan.epsilon < best {
                best = plan.epsilon;
                choice = Choice::Rp(plan);
            }
        }

        let mechanism = match (&choice, best > T::zero()) {
            (_, false) => Mechanism::Free,
            (Choice::Mmm(_), true) => Mechanism::Mmm,
            (Choice::Se(..), true) => Mechanism::Se,
            (Choice::Rp(_), true) => Mechanism::Rp,
        };
        if !self.ledger.would_admit(best) {
            self.ledger.record(id, mechanism, best);
            return Ok(Outcome::Rejected(Rejection {
                id,
                required_epsilon: best,
                remaining_budget: self.ledger.remaining(),
            }));
        }

        let seed = self.config.seed;
        let attrs_hash = hash_of(&attrs);
        let rng_for = move |key: &NodeKey, t: u64| ChaCha8Rng::seed_from_u64(hash_of((seed, attrs_hash, t, key)));
        let enable_pq = self.config.enable_pq;
        let cache = self
            .caches
            .entry(attrs.clone())
            .or_insert_with(|| StrategyCache::new(space.node_count()));

        let release_plan = |cache: &mut StrategyCache<T>, prep: &Prepared<T>, plan: &CostPlan<T>| {
            let proactive = if enable_pq && !plan.paid.is_empty() {
                let paid: Vec<NodeKey> = plan.paid.iter().map(|&j| prep.strategy.keys[j].clone()).collect();
                pq::proactive_rows(&space, &paid, &|k| cache.contains(k))
            } else {
                Vec::new()
            };
            let release =
                mmm::answer_workload(cache, &space, &prep.strategy, &prep.m, plan, &x, &proactive, &rng_for)?;
            Ok::<_, Error>((release, proactive.len()))
        };

        let answer = match &choice {
            Choice::Mmm(plan) => {
                let (rel, pq_rows) = release_plan(cache, &base, plan)?;
                Answer {
                    id,
                    responses: rel.responses,
                    epsilon: best,
                    mechanism,
                    free_rows: plan.free.len(),
                    paid_rows: plan.paid.len(),
                    timestamp: rel.timestamp,
                    estimates,
                    proactive_rows: pq_rows,
                }
            }
            Choice::Se(prep, plan) => {
                let (rel, pq_rows) = release_plan(cache, prep, plan)?;
                Answer {
                    id,
                    responses: rel.responses,
                    epsilon: best,
                    mechanism,
                    free_rows: plan.free.len(),
                    paid_rows: plan.paid.len(),
                    timestamp: rel.timestamp,
                    estimates,
                    proactive_rows: pq_rows,
                }
            }
            Choice::Rp(plan) => {
                let (responses, t) = rp::answer_workload(cache, &space, &base.strategy, &base.m, plan, &x, &rng_for)?;
                let relaxed = if plan.is_free() { 0 } else { plan.group.len() };
                Answer {
                    id,
                    responses,
                    epsilon: best,
                    mechanism,
                    free_rows: plan.group.len() - relaxed,
                    paid_rows: relaxed,
                    timestamp: t,
                    estimates,
                    proactive_rows: 0,
                }
            }
        };
        let admitted = self.ledger.record(id, mechanism, best);
        debug_assert!(admitted, "admission checked before answering");
        Ok(Outcome::Answered(answer))
    }
}
