//! Seeded runs of a task against a set of systems.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use noisecache::{AccuracyRequirement, Mechanism, StrategyTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate, DataKind};
use crate::systems::{Label, SystemKind, Toggles};
use crate::tasks::{Bfs, Client, Dfs, Rrq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Bfs,
    Dfs,
    Rrq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub data: DataKind,
    pub domain: usize,
    pub rows: usize,
    pub clients: usize,
    /// Every client gets the first client's parameters.
    pub repeated_clients: bool,
    /// Each client draws `alpha = a * rows` for `a` from this list.
    pub alpha_fracs: Vec<f64>,
    pub beta: f64,
    /// BFS expansion threshold range, as fractions of the row count.
    pub bfs_threshold: (f64, f64),
    /// DFS "low count" bound range, as fractions of the row count.
    pub dfs_low: (f64, f64),
    pub rrq_count: usize,
    pub runs: usize,
    pub seed: u64,
    pub mc_samples: usize,
    pub total_budget: f64,
    /// Hard cap on workloads per run.
    pub max_workloads: usize,
}

impl TaskConfig {
    pub fn bfs(domain: usize, clients: usize, runs: usize, seed: u64) -> Self {
        Self {
            kind: TaskKind::Bfs,
            data: DataKind::zipf(),
            domain,
            rows: 10_000,
            clients,
            repeated_clients: false,
            alpha_fracs: vec![0.01, 0.06, 0.11, 0.16],
            beta: 0.05,
            bfs_threshold: (0.005, 0.05),
            dfs_low: (0.001, 0.01),
            rrq_count: 2000,
            runs,
            seed,
            mc_samples: 2000,
            total_budget: 1e9,
            max_workloads: 10_000,
        }
    }

    pub fn dfs(domain: usize, clients: usize, runs: usize, seed: u64) -> Self {
        Self { kind: TaskKind::Dfs, data: DataKind::PlantedSparse, ..Self::bfs(domain, clients, runs, seed) }
    }

    pub fn rrq(count: usize, runs: usize, seed: u64) -> Self {
        Self {
            kind: TaskKind::Rrq,
            data: DataKind::Uniform,
            domain: 1000,
            rrq_count: count,
            clients: 1,
            ..Self::bfs(1000, 1, runs, seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step {
    pub workload: usize,
    pub client: usize,
    pub epsilon: f64,
    pub cum_epsilon: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run: usize,
    pub system: String,
    pub steps: Vec<Step>,
}

impl RunResult {
    pub fn final_epsilon(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_epsilon)
    }

    pub fn count(&self, label: Label) -> usize {
        self.steps.iter().filter(|s| s.label == label).count()
    }

    pub fn free_count(&self) -> usize {
        self.count(Label::Answered(Mechanism::Free))
    }
}

fn mix(parts: impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    h.finish()
}

struct ClientSpec {
    alpha: f64,
    param: f64,
}

fn client_specs(cfg: &TaskConfig, seed: u64) -> Vec<ClientSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix((seed, "clients")));
    let rows = cfg.rows as f64;
    let range = if cfg.kind == TaskKind::Dfs { cfg.dfs_low } else { cfg.bfs_threshold };
    let mut specs: Vec<ClientSpec> = (0..cfg.clients.max(1))
        .map(|_| ClientSpec {
            alpha: cfg.alpha_fracs[rng.random_range(0..cfg.alpha_fracs.len())] * rows,
            param: rng.random_range(range.0..=range.1) * rows,
        })
        .collect();
    if cfg.repeated_clients {
        let (alpha, param) = (specs[0].alpha, specs[0].param);
        specs.iter_mut().for_each(|s| *s = ClientSpec { alpha, param });
    }
    specs
}

fn clients(cfg: &TaskConfig, seed: u64) -> Vec<Box<dyn Client>> {
    let tree = Arc::new(StrategyTree::build(cfg.domain, 2).expect("non-empty domain"));
    let height = tree.height();
    if cfg.kind == TaskKind::Rrq {
        return vec![Box::new(Rrq::new(cfg.domain, cfg.rrq_count, mix((seed, "rrq"))))];
    }
    client_specs(cfg, seed)
        .into_iter()
        .enumerate()
        .map(|(i, s)| -> Box<dyn Client> {
            let acc = AccuracyRequirement::worst(s.alpha, cfg.beta);
            match cfg.kind {
                TaskKind::Bfs => Box::new(Bfs::new(tree.clone(), acc, s.param)),
                // the same backtracking stream for repeated clients
                TaskKind::Dfs => {
                    let stream = if cfg.repeated_clients { 0 } else { i };
                    Box::new(Dfs::new(tree.clone(), acc, s.param, mix((seed, "dfs", stream)), 4 * height + 8))
                }
                TaskKind::Rrq => unreachable!(),
            }
        })
        .collect()
}

/// One run of the task against one system. The data, clients and schedule
/// depend only on `(cfg.seed, run)`, so runs of different systems are paired.
pub fn run_once(cfg: &TaskConfig, system: SystemKind, run: usize) -> RunResult {
    let seed = mix((cfg.seed, run));
    let data = generate(cfg.data, cfg.domain, cfg.rows, mix((seed, "data")));
    let mut sys = system.build(data, mix((seed, "engine")), cfg.total_budget, cfg.mc_samples);
    let mut clients = clients(cfg, seed);
    let mut active: Vec<usize> = (0..clients.len()).collect();
    let mut schedule = ChaCha8Rng::seed_from_u64(mix((seed, "schedule")));
    let mut steps = Vec::new();
    let mut cum = 0.0;
    while !active.is_empty() && steps.len() < cfg.max_workloads {
        let pick = schedule.random_range(0..active.len());
        let c = active[pick];
        let Some(req) = clients[c].next() else {
            active.remove(pick);
            continue;
        };
        let served = sys.submit(&req);
        clients[c].observe(served.responses.as_deref());
        cum += served.epsilon;
        steps.push(Step { workload: steps.len(), client: c, epsilon: served.epsilon, cum_epsilon: cum, label: served.label });
    }
    RunResult { run, system: system.name(), steps }
}

/// All runs of `cfg` against every system, in parallel. Results are ordered
/// by run, then by the order of `systems`.
pub fn run_task(cfg: &TaskConfig, systems: &[SystemKind]) -> Vec<RunResult> {
    let jobs: Vec<(usize, SystemKind)> =
        (0..cfg.runs).flat_map(|r| systems.iter().map(move |&s| (r, s))).collect();
    jobs.into_par_iter().map(|(r, s)| run_once(cfg, s, r)).collect()
}

/// The full engine and each configuration with one module switched off.
pub struct Ablation;

impl Ablation {
    pub fn systems() -> Vec<SystemKind> {
        let t = Toggles::ALL;
        vec![
            SystemKind::Cached(t),
            SystemKind::Cached(Toggles { mmm: false, ..t }),
            SystemKind::Cached(Toggles { se: false, ..t }),
            SystemKind::Cached(Toggles { rp: false, ..t }),
            SystemKind::Cached(Toggles { pq: false, ..t }),
        ]
    }
}
