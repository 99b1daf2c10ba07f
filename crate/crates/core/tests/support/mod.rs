//! Independent oracles and property checks shared by the core integration
//! tests and the acceptance runner. Nothing here calls back into the code
//! under test to compute an expected value.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use noisecache::cache::{CacheEntry, CacheSnapshot, StrategyCache};
use noisecache::calibration::{AccuracyOracle, McConfig};
use noisecache::engine::{Engine, EngineConfig, Outcome};
use noisecache::frt::MappedStrategy;
use noisecache::mmm::{self, SearchParams};
use noisecache::query::{AccuracyRequirement, WorkloadRequest};
use noisecache::schema::{Attribute, AttributeDomain};
use noisecache::{attr_set, pq, AttributeSpace, Dataset, DomainSchema, NodeKey, RangeQuery};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError};

pub fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        max_shrink_iters: 256,
        ..Config::default()
    }
}

// ---------- oracles ----------

/// Fewest nodes from `intervals` whose disjoint union is exactly `[lo, hi)`,
/// by dynamic programming over start positions.
pub fn min_exact_cover(intervals: &[(usize, usize)], lo: usize, hi: usize) -> Option<usize> {
    let mut best: Vec<Option<usize>> = vec![None; hi - lo + 1];
    best[hi - lo] = Some(0);
    for s in (lo..hi).rev() {
        best[s - lo] = intervals
            .iter()
            .filter(|&&(a, b)| a == s && b <= hi)
            .filter_map(|&(_, b)| best[b - lo].map(|c| c + 1))
            .min();
    }
    best[0]
}

const PRIME: u64 = 2_147_483_647;

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1;
    b %= PRIME;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % PRIME;
        }
        b = b * b % PRIME;
        e >>= 1;
    }
    r
}

/// Rank over GF(p). Never exceeds the rational rank of an integer matrix, so
/// a full-column answer certifies full column rank over the reals.
pub fn rank_mod_p(rows: &[Vec<u64>]) -> usize {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|v| v % PRIME).collect()).collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][col] != 0) else { continue };
        m.swap(rank, p);
        let inv = pow_mod(m[rank][col], PRIME - 2);
        let pivot = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[col] != 0 {
                let f = row[col] * inv % PRIME;
                for (x, &p) in row[col..ncols].iter_mut().zip(&pivot[col..ncols]) {
                    *x = (*x + PRIME - f * p % PRIME) % PRIME;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn to_int_rows(a: &DMatrix<f64>) -> Vec<Vec<u64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].round() as u64).collect()).collect()
}

/// Number of distinct non-empty membership signatures among the cells,
/// i.e. the atoms of the set family.
pub fn atom_count(rows: &[Vec<usize>], n: usize) -> usize {
    let mut sig: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, r) in rows.iter().enumerate() {
        for &c in r {
            sig[c].push(i);
        }
    }
    sig.into_iter().filter(|s| !s.is_empty()).collect::<BTreeSet<_>>().len()
}

/// Largest number of rows covering one cell: the column-sum L1 norm of the
/// 0/1 strategy matrix.
pub fn max_coverage(rows: &[Vec<usize>], n: usize) -> usize {
    let mut cover = vec![0; n];
    for r in rows {
        for &c in r {
            cover[c] += 1;
        }
    }
    cover.into_iter().max().unwrap_or(0)
}

/// Left inverse `(A^T A)^{-1} A^T` of a full-column-rank matrix.
pub fn left_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let ata = a.transpose() * a;
    ata.try_inverse().expect("full column rank") * a.transpose()
}

/// `||W A^+ diag(b)||_F^2` through the normal equations.
pub fn weighted_error(w: &DMatrix<f64>, a: &DMatrix<f64>, b: &[f64]) -> f64 {
    let m = w * left_inverse(a);
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += (m[(i, j)] * b[j]).powi(2);
        }
    }
    s
}

pub fn dense(rows: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Standard Laplace CDF.
pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// Two-sided one-sample KS statistic and its asymptotic p-value.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

// ---------- fixtures ----------

pub fn int_attr(name: &str, n: usize) -> Attribute {
    Attribute { name: name.into(), domain: AttributeDomain::IntRange { lo: 0, hi: n as i64 } }
}

pub fn space_1d(n: usize, k: usize) -> AttributeSpace {
    AttributeSpace::new(&DomainSchema::single("a", n), &attr_set(&["a"]), k).unwrap()
}

pub fn space_2d(n1: usize, n2: usize, k: usize) -> AttributeSpace {
    let schema = DomainSchema::new(vec![int_attr("a", n1), int_attr("b", n2)]).unwrap();
    AttributeSpace::new(&schema, &attr_set(&["a", "b"]), k).unwrap()
}

pub fn key_of(space: &AttributeSpace, lo: usize, hi: usize) -> NodeKey {
    NodeKey(vec![space.trees()[0].find(lo, hi).expect("tree node")])
}

pub fn cache_with(space: &AttributeSpace, entries: &[(NodeKey, f64, u64)]) -> StrategyCache<f64> {
    let clock = entries.iter().map(|e| e.2).max().unwrap_or(0);
    StrategyCache::restore(CacheSnapshot {
        clock,
        capacity: space.node_count(),
        entries: entries.iter().map(|(k, b, t)| (k.clone(), CacheEntry { b: *b, y: 0.0, t: *t })).collect(),
    })
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance1 {
    pub n: usize,
    pub k: usize,
    pub queries: Vec<(usize, usize)>,
}

pub fn instance_1d(max_n: usize, max_q: usize) -> impl Strategy<Value = Instance1> {
    (2..=max_n, 2..=4usize)
        .prop_flat_map(move |(n, k)| {
            let q = (0..n).prop_flat_map(move |lo| (Just(lo), lo + 1..=n));
            (Just(n), Just(k), prop::collection::vec(q, 1..=max_q))
        })
        .prop_map(|(n, k, queries)| Instance1 { n, k, queries })
}

#[derive(Debug, Clone)]
pub struct Instance2 {
    pub n: (usize, usize),
    pub k: usize,
    pub queries: Vec<[(usize, usize); 2]>,
}

pub fn instance_2d(max_n: usize, max_q: usize) -> impl Strategy<Value = Instance2> {
    (2..=max_n, 2..=max_n, 2..=3usize)
        .prop_flat_map(move |(n1, n2, k)| {
            let r1 = (0..n1).prop_flat_map(move |lo| (Just(lo), lo + 1..=n1));
            let r2 = (0..n2).prop_flat_map(move |lo| (Just(lo), lo + 1..=n2));
            let q = (r1, r2).prop_map(|(a, b)| [a, b]);
            (Just((n1, n2)), Just(k), prop::collection::vec(q, 1..=max_q))
        })
        .prop_map(|(n, k, queries)| Instance2 { n, k, queries })
}

impl Instance1 {
    pub fn space(&self) -> AttributeSpace {
        space_1d(self.n, self.k)
    }
    pub fn range_queries(&self) -> Vec<RangeQuery> {
        self.queries.iter().map(|&(lo, hi)| RangeQuery::single(lo, hi)).collect()
    }
}

impl Instance2 {
    pub fn space(&self) -> AttributeSpace {
        space_2d(self.n.0, self.n.1, self.k)
    }
    pub fn range_queries(&self) -> Vec<RangeQuery> {
        self.queries.iter().map(|q| RangeQuery(q.to_vec())).collect()
    }
}

// ---------- property checks ----------

/// Decomposition is an exact minimal cover of each query by tree nodes.
pub fn check_decomposition(inst: &Instance1) -> Result<(), TestCaseError> {
    let space = inst.space();
    let tree = &space.trees()[0];
    let intervals: Vec<(usize, usize)> = tree.nodes().iter().map(|v| (v.lo, v.hi)).collect();
    for &(lo, hi) in &inst.queries {
        let nodes = tree.decompose(lo, hi).unwrap();
        let mut cells: Vec<usize> = nodes.iter().flat_map(|&v| intervals[v].0..intervals[v].1).collect();
        cells.sort_unstable();
        prop_assert_eq!(cells, (lo..hi).collect::<Vec<_>>());
        prop_assert_eq!(Some(nodes.len()), min_exact_cover(&intervals, lo, hi));
    }
    Ok(())
}

fn check_mapped(space: &AttributeSpace, queries: &[RangeQuery], laminar: bool) -> Result<(), TestCaseError> {
    let rows = space.generate_strategy(queries).unwrap();
    let s = MappedStrategy::<f64>::build(space, rows.clone());
    let n = space.domain_size();
    let ncols = s.a.ncols();

    // buckets partition the union of the rows
    let mut seen = vec![false; n];
    for b in &s.buckets {
        for &c in b {
            prop_assert!(!seen[c], "cell {} in two buckets", c);
            seen[c] = true;
        }
    }
    let union: BTreeSet<usize> = s.cells.iter().flatten().copied().collect();
    prop_assert_eq!(union.len(), seen.iter().filter(|&&x| x).count());
    prop_assert_eq!(ncols, atom_count(&s.cells, n));

    let rank = rank_mod_p(&to_int_rows(&s.a));
    if laminar {
        // nested rows: the mapped matrix has full column rank
        prop_assert_eq!(rank, ncols);
    }

    // support: each strategy row and each query is exactly a union of buckets
    let qcells: Vec<Vec<usize>> = queries.iter().map(|q| space.box_cells(&q.0)).collect();
    let w = s.map_rows(&qcells);
    for (m, sets) in [(&s.a, &s.cells), (&w, &qcells)] {
        for (i, set) in sets.iter().enumerate() {
            let mut rebuilt: Vec<usize> =
                (0..ncols).filter(|&j| m[(i, j)] == 1.0).flat_map(|j| s.buckets[j].clone()).collect();
            rebuilt.sort_unstable();
            let mut want = set.clone();
            want.sort_unstable();
            prop_assert_eq!(rebuilt, want);
        }
    }

    // the mapped workload lies in the row space of A'
    let mut stacked = to_int_rows(&s.a);
    stacked.extend(to_int_rows(&w));
    prop_assert_eq!(rank_mod_p(&stacked), rank);

    // column-sum L1 agrees everywhere
    let l1 = max_coverage(&s.cells, n);
    prop_assert_eq!(space.l1_norm(&rows), l1);
    prop_assert_eq!(s.l1_norm(), l1);
    prop_assert_eq!(noisecache::linalg::l1_norm(&s.a) as usize, l1);

    // growth matches the atom count of each prefix
    for i in 0..rows.len() {
        let before = atom_count(&s.cells[..i], n);
        let after = atom_count(&s.cells[..=i], n);
        prop_assert_eq!(s.growth[i], after - before);
        if laminar {
            prop_assert!(s.growth[i] <= 1, "row {} added {} buckets", i, s.growth[i]);
        }
    }
    Ok(())
}

pub fn check_frt_1d(inst: &Instance1) -> Result<(), TestCaseError> {
    check_mapped(&inst.space(), &inst.range_queries(), true)
}

pub fn check_frt_2d(inst: &Instance2) -> Result<(), TestCaseError> {
    check_mapped(&inst.space(), &inst.range_queries(), false)
}

fn check_pq_rows(space: &AttributeSpace, paid: &[NodeKey], cached: &BTreeSet<NodeKey>) -> Result<(), TestCaseError> {
    let extra = pq::proactive_rows(space, paid, &|k| cached.contains(k));
    let n = space.domain_size();
    let cells = |ks: &[NodeKey]| ks.iter().map(|k| space.cells(k)).collect::<Vec<_>>();
    for k in &extra {
        prop_assert!(!paid.contains(k) && !cached.contains(k), "proactive row {:?} already known", k);
    }
    let distinct: BTreeSet<&NodeKey> = extra.iter().collect();
    prop_assert_eq!(distinct.len(), extra.len());
    let mut all = paid.to_vec();
    all.extend(extra);
    prop_assert_eq!(max_coverage(&cells(&all), n), max_coverage(&cells(paid), n));
    Ok(())
}

/// Proactive rows never raise the L1 norm of the paid rows.
pub fn check_pq_1d(inst: &Instance1, cache_mask: u64) -> Result<(), TestCaseError> {
    let space = inst.space();
    let paid = space.generate_strategy(&inst.range_queries()).unwrap();
    let cached: BTreeSet<NodeKey> = (0..space.node_count())
        .filter(|v| cache_mask >> (v % 64) & 1 == 1)
        .map(|v| NodeKey(vec![v]))
        .filter(|k| !paid.contains(k))
        .collect();
    check_pq_rows(&space, &paid, &cached)
}

pub fn check_pq_2d(inst: &Instance2, cache_mask: u64) -> Result<(), TestCaseError> {
    let space = inst.space();
    let paid = space.generate_strategy(&inst.range_queries()).unwrap();
    let cached: BTreeSet<NodeKey> = space
        .combined_tree()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| cache_mask >> (i % 64) & 1 == 1)
        .map(|(_, (k, _))| k)
        .filter(|k| !paid.contains(k))
        .collect();
    check_pq_rows(&space, &paid, &cached)
}

/// Cache-aware estimate never exceeds the cacheless one on the same draws.
pub fn check_dominance(
    inst: &Instance1,
    alpha_frac: f64,
    squared: bool,
    scale_factors: &[Option<f64>],
    seed: u64,
) -> Result<(), TestCaseError> {
    let space = inst.space();
    let queries = inst.range_queries();
    let rows = space.generate_strategy(&queries).unwrap();
    let s = MappedStrategy::<f64>::build(&space, rows);
    let qcells: Vec<Vec<usize>> = queries.iter().map(|q| space.box_cells(&q.0)).collect();
    let m = s.map_rows(&qcells) * noisecache::linalg::pinv(&s.a);
    let alpha = alpha_frac * inst.n as f64;
    let req = if squared {
        AccuracyRequirement::ExpectedSquaredError { alpha_sq: alpha * alpha }
    } else {
        AccuracyRequirement::worst(alpha, 0.05)
    };
    let oracle = AccuracyOracle::new(m, req, McConfig { mc_samples: 1000, seed });
    let params = SearchParams::default();
    let base = mmm::cacheless_budget(&s, &oracle, &params);
    let cached: Vec<Option<f64>> =
        (0..s.len()).map(|i| scale_factors[i % scale_factors.len()].map(|f| f * base.cacheless_b)).collect();
    let plan = mmm::estimate_privacy_budget(&s, &oracle, &cached, &params);
    prop_assert!(plan.epsilon >= 0.0);
    prop_assert!(
        plan.epsilon <= plan.cacheless_epsilon,
        "cached {} > cacheless {}",
        plan.epsilon,
        plan.cacheless_epsilon
    );
    prop_assert_eq!(plan.cacheless_epsilon, base.epsilon);
    // free rows are exactly the cached rows at or below the paid scale
    for (j, c) in cached.iter().enumerate() {
        let free = plan.free.iter().any(|&(i, _)| i == j);
        prop_assert_eq!(free, c.is_some_and(|c| c <= plan.b_paid));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LogItem {
    pub queries: Vec<(usize, usize)>,
    pub alpha_frac: f64,
}

pub fn request_log(n: usize) -> impl Strategy<Value = Vec<LogItem>> {
    let q = (0..n).prop_flat_map(move |lo| (Just(lo), lo + 1..=n));
    let item = (prop::collection::vec(q, 1..=3), 0.02..0.5f64)
        .prop_map(|(queries, alpha_frac)| LogItem { queries, alpha_frac });
    prop::collection::vec(item, 1..=6)
}

pub fn small_dataset(n: usize, rows: usize, seed: u64) -> Arc<Dataset> {
    let data: Vec<Vec<usize>> = (0..rows).map(|i| vec![(i * 31 + (seed % 1000) as usize * 7 + i * i) % n]).collect();
    Arc::new(Dataset::from_positions(DomainSchema::single("a", n), &data).unwrap())
}

/// Cumulative charge stays below the total, charges are non-negative, and
/// the ledger sums exactly to what was reported as charged.
pub fn check_ledger(log: &[LogItem], total: f64, seed: u64) -> Result<(), TestCaseError> {
    let n = 16;
    let cfg = EngineConfig { total_budget: total, seed, mc_samples: 1000, ..EngineConfig::default() };
    let mut engine = Engine::<f64>::new(cfg, small_dataset(n, 400, seed)).unwrap();
    let mut sum = 0.0;
    let mut seen: HashMap<u64, bool> = HashMap::new();
    for item in log {
        let req = WorkloadRequest::ranges(
            "a",
            &item.queries,
            AccuracyRequirement::worst(item.alpha_frac * 400.0, 0.05),
        );
        let before = engine.ledger().consumed();
        let out = engine.process(&req).unwrap();
        match &out {
            Outcome::Answered(a) => {
                prop_assert!(a.epsilon >= 0.0);
                prop_assert!(a.epsilon == 0.0 || before + a.epsilon < total);
                prop_assert_eq!(a.responses.len(), item.queries.len());
                sum += a.epsilon;
                seen.insert(a.id, true);
            }
            Outcome::Rejected(r) => {
                prop_assert!(r.required_epsilon > 0.0 && before + r.required_epsilon >= total);
                prop_assert_eq!(engine.ledger().consumed(), before);
                seen.insert(r.id, false);
            }
        }
        prop_assert!(engine.ledger().consumed() <= total);
    }
    prop_assert!((engine.ledger().consumed() - sum).abs() <= 1e-9 * sum.max(1.0));
    for e in engine.ledger().log() {
        prop_assert_eq!(seen.get(&e.id).copied(), Some(e.accepted));
    }
    Ok(())
}

// ---------- numeric fixtures ----------

/// Random 5x5 instance: 0/1 workload, invertible 0/1 strategy and scales in
/// `[1, 10)`. Returns `(M, scales)` with `M` built from the normal equations.
pub fn random_error_instance(seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(5, 5, |_, _| f64::from(rng.random_bool(0.5) as u8));
    let a = loop {
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { f64::from(rng.random_bool(0.3) as u8) });
        if rank_mod_p(&to_int_rows(&a)) == 5 {
            break a;
        }
    };
    let scales = (0..5).map(|_| rng.random_range(1.0..10.0)).collect();
    (w * left_inverse(&a), scales)
}

/// `E ||M Lap(B)||^2 = 2 sum_ij M_ij^2 b_j^2`, summed entry by entry.
pub fn closed_form_squared_error(m: &DMatrix<f64>, scales: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += 2.0 * (m[(i, j)] * scales[j]).powi(2);
        }
    }
    s
}

/// Budget the engine charges for one counting query that is a single tree
/// node, at `(alpha, beta)` worst error.
pub fn single_query_epsilon(alpha: f64, beta: f64, mc_samples: usize, seed: u64) -> f64 {
    let cfg = EngineConfig { total_budget: 10.0, seed, mc_samples, ..EngineConfig::default() };
    let mut engine = Engine::<f64>::new(cfg, small_dataset(16, 500, 1)).unwrap();
    let req = WorkloadRequest::ranges("a", &[(0, 16)], AccuracyRequirement::worst(alpha, beta));
    engine.process(&req).unwrap().answer().expect("within budget").epsilon
}

/// Tightened noise for `n` old draws from `Lap(b_old)`, and the fraction of
/// draws left unchanged.
pub fn relaxed_noise(b_old: f64, b_new: f64, n: usize, seed: u64) -> (Vec<f64>, f64) {
    use rand::SeedableRng;
    use noisecache::calibration::standard_laplace;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut kept = 0usize;
    let out = (0..n)
        .map(|_| {
            let old = b_old * standard_laplace(&mut rng);
            let new = noisecache::rp::noise_down(&mut rng, old, b_old, b_new);
            kept += usize::from(new == old);
            new
        })
        .collect();
    (out, kept as f64 / n as f64)
}

/// Charges for a workload asked loosely then tightly on one engine, and the
/// charge for asking it tightly on a fresh engine.
pub fn relaxation_charges(alpha_loose: f64, alpha_tight: f64, seed: u64) -> (f64, f64, f64, noisecache::Mechanism) {
    let cfg = EngineConfig { total_budget: 100.0, seed, mc_samples: 4000, ..EngineConfig::default() };
    let data = small_dataset(16, 500, 2);
    let ranges = [(2, 9), (5, 13)];
    let req = |alpha| WorkloadRequest::ranges("a", &ranges, AccuracyRequirement::worst(alpha, 0.05));
    let mut engine = Engine::<f64>::new(cfg.clone(), data.clone()).unwrap();
    let e1 = engine.process(&req(alpha_loose)).unwrap();
    let e_rp = engine.process(&req(alpha_tight)).unwrap();
    let mechanism = e_rp.answer().unwrap().mechanism;
    let mut fresh = Engine::<f64>::new(cfg, data).unwrap();
    let e2 = fresh.process(&req(alpha_tight)).unwrap();
    (e1.charged(), e_rp.charged(), e2.charged(), mechanism)
}
