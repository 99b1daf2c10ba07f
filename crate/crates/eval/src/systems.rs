//! The systems under comparison, behind one interface.

use std::sync::Arc;

use noisecache::engine::{Mechanism, Outcome};
use noisecache::{attr_set, AccuracyRequirement, Dataset, Engine, EngineConfig, RangeQuery, WorkloadRequest};
use serde::{Deserialize, Serialize};

/// How a workload was served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Answered(Mechanism),
    Rejected,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Answered(m) => m.as_str(),
            Self::Rejected => "Rejected",
        }
    }
}

pub struct Served {
    pub responses: Option<Vec<f64>>,
    pub epsilon: f64,
    pub label: Label,
}

pub trait System {
    fn submit(&mut self, req: &WorkloadRequest) -> Served;
}

/// Module switches for the caching engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Toggles {
    pub mmm: bool,
    pub se: bool,
    pub pq: bool,
    pub rp: bool,
}

impl Toggles {
    pub const ALL: Self = Self { mmm: true, se: true, pq: true, rp: true };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemKind {
    Cached(Toggles),
    /// Every workload calibrated and paid on its own.
    Cacheless,
    /// Cacheless, plus free replays of exact repeats at equal or looser accuracy.
    NaiveCache,
}

impl SystemKind {
    pub fn name(self) -> String {
        match self {
            Self::Cached(t) if t == Toggles::ALL => "NoiseCache".into(),
            Self::Cached(t) => {
                let off: Vec<&str> = [(t.mmm, "MMM"), (t.se, "SE"), (t.pq, "PQ"), (t.rp, "RP")]
                    .iter()
                    .filter(|(on, _)| !on)
                    .map(|(_, n)| *n)
                    .collect();
                format!("NoiseCache-no{}", off.join("-no"))
            }
            Self::Cacheless => "Cacheless".into(),
            Self::NaiveCache => "NaiveCache".into(),
        }
    }

    pub fn build(self, data: Arc<Dataset>, seed: u64, total_budget: f64, mc_samples: usize) -> Box<dyn System + Send> {
        let base = EngineConfig { total_budget, seed, mc_samples, ..EngineConfig::default() };
        match self {
            Self::Cached(t) => {
                let cfg = EngineConfig { enable_mmm: t.mmm, enable_se: t.se, enable_pq: t.pq, enable_rp: t.rp, ..base };
                Box::new(EngineSystem(Engine::new(cfg, data).expect("valid engine config")))
            }
            Self::Cacheless => Box::new(EngineSystem(cacheless(base, data))),
            Self::NaiveCache => Box::new(NaiveCache { engine: cacheless(base, data), seen: Vec::new() }),
        }
    }
}

fn cacheless(base: EngineConfig, data: Arc<Dataset>) -> Engine {
    let cfg = EngineConfig { mc_samples: base.mc_samples, ..EngineConfig::cacheless(base.total_budget, base.seed) };
    Engine::new(cfg, data).expect("valid engine config")
}

struct EngineSystem(Engine);

fn serve(engine: &mut Engine, req: &WorkloadRequest) -> Served {
    match engine.process(req).expect("harness issues valid workloads") {
        Outcome::Answered(a) => Served { epsilon: a.epsilon, label: Label::Answered(a.mechanism), responses: Some(a.responses) },
        Outcome::Rejected(_) => Served { responses: None, epsilon: 0.0, label: Label::Rejected },
    }
}

impl System for EngineSystem {
    fn submit(&mut self, req: &WorkloadRequest) -> Served {
        serve(&mut self.0, req)
    }
}

type WorkloadKey = (Vec<String>, Vec<RangeQuery>);

struct NaiveCache {
    engine: Engine,
    seen: Vec<(WorkloadKey, AccuracyRequirement, Vec<f64>)>,
}

fn key_of(req: &WorkloadRequest) -> WorkloadKey {
    let attrs = attr_set(&req.attributes);
    let perm: Vec<usize> = attrs.iter().map(|a| req.attributes.iter().position(|b| b == a).unwrap_or(0)).collect();
    let queries = req.queries.iter().map(|q| RangeQuery(perm.iter().map(|&p| q.0[p]).collect())).collect();
    (attrs, queries)
}

impl System for NaiveCache {
    fn submit(&mut self, req: &WorkloadRequest) -> Served {
        let key = key_of(req);
        if let Some((_, _, responses)) =
            self.seen.iter().find(|(k, acc, _)| *k == key && req.accuracy.no_tighter_than(acc))
        {
            return Served { responses: Some(responses.clone()), epsilon: 0.0, label: Label::Answered(Mechanism::Free) };
        }
        let served = serve(&mut self.engine, req);
        if let Some(r) = &served.responses {
            self.seen.push((key, req.accuracy, r.clone()));
        }
        served
    }
}
