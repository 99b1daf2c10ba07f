use std::sync::{Mutex, RwLock};

use noisecache::engine::{LedgerEntry, Mechanism};
use noisecache::{attr_set, AttrSet, Engine, Error, Outcome, WorkloadRequest};
use serde::Serialize;
use serde_json::{json, Value};

/// Status code and JSON body, shared by the HTTP layer and the REPL.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Reply {
    fn ok(body: impl Serialize) -> Self {
        Self { status: 200, body: serde_json::to_value(body).expect("serializable body") }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Self { status, body: json!({ "error": message.to_string() }) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryItem {
    pub id: u64,
    pub mechanism: Mechanism,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetView {
    pub total: f64,
    pub consumed: f64,
    pub remaining: f64,
    pub history: Vec<HistoryItem>,
}

impl BudgetView {
    fn of(engine: &Engine) -> Self {
        let l = engine.ledger();
        Self {
            total: l.total(),
            consumed: l.consumed(),
            remaining: l.remaining(),
            history: l
                .history()
                .map(|e: &LedgerEntry<f64>| HistoryItem { id: e.id, mechanism: e.mechanism, epsilon: e.epsilon })
                .collect(),
        }
    }
}

/// One engine per process. Mutations are serialized on the engine lock; the
/// budget is also published as a snapshot so reads never wait on a workload.
pub struct Session {
    engine: Mutex<Engine>,
    budget: RwLock<BudgetView>,
}

fn parse_attrs(attrs: Option<&str>) -> Result<AttrSet, Reply> {
    let names: Vec<&str> = attrs
        .unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Reply::error(400, "missing `attrs`, e.g. ?attrs=age,income"));
    }
    Ok(attr_set(&names))
}

fn lookup_error(e: Error) -> Reply {
    match e {
        Error::UnknownAttribute(_) => Reply::error(404, e),
        other => Reply::error(500, other),
    }
}

impl Session {
    pub fn new(engine: Engine) -> Self {
        let budget = RwLock::new(BudgetView::of(&engine));
        Self { engine: Mutex::new(engine), budget }
    }

    fn with_engine<R>(&self, f: impl FnOnce(&mut Engine) -> R) -> R {
        let mut engine = self.engine.lock().unwrap_or_else(|p| p.into_inner());
        let out = f(&mut engine);
        *self.budget.write().unwrap_or_else(|p| p.into_inner()) = BudgetView::of(&engine);
        out
    }

    /// `POST /workload`.
    pub fn workload(&self, body: &[u8]) -> Reply {
        let req: WorkloadRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return Reply::error(400, format!("malformed workload: {e}")),
        };
        match self.with_engine(|e| e.process(&req)) {
            Ok(Outcome::Answered(a)) => Reply::ok(a),
            Ok(Outcome::Rejected(r)) => Reply { status: 409, body: serde_json::to_value(r).expect("serializable") },
            Err(Error::InvalidQuery { index, reason }) => Reply {
                status: 400,
                body: json!({ "error": format!("query {index}: {reason}"), "query_index": index }),
            },
            Err(e @ (Error::InvalidRequest(_) | Error::UnknownAttribute(_) | Error::Schema(_))) => Reply::error(400, e),
            Err(e) => {
                tracing::error!(error = %e, "workload failed");
                Reply::error(500, e)
            }
        }
    }

    /// `GET /budget`.
    pub fn budget(&self) -> Reply {
        Reply::ok(&*self.budget.read().unwrap_or_else(|p| p.into_inner()))
    }

    pub fn budget_view(&self) -> BudgetView {
        self.budget.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// `GET /tree?attrs=...`.
    pub fn tree(&self, attrs: Option<&str>) -> Reply {
        let attrs = match parse_attrs(attrs) {
            Ok(a) => a,
            Err(r) => return r,
        };
        match self.with_engine(|e| e.tree(&attrs)) {
            Ok(nodes) => Reply::ok(json!({ "attributes": attrs, "nodes": nodes })),
            Err(e) => lookup_error(e),
        }
    }

    /// `GET /cache/stats?attrs=...`.
    pub fn cache_stats(&self, attrs: Option<&str>) -> Reply {
        let attrs = match parse_attrs(attrs) {
            Ok(a) => a,
            Err(r) => return r,
        };
        match self.with_engine(|e| e.cache_stats(&attrs)) {
            Ok(stats) => Reply::ok(stats),
            Err(e) => lookup_error(e),
        }
    }

    /// Clears every cache and the ledger.
    pub fn reset(&self, seed: u64, total_budget: f64) -> Reply {
        if total_budget.is_nan() || total_budget < 0.0 {
            return Reply::error(400, "total budget must be non-negative");
        }
        self.with_engine(|e| e.reset(seed, total_budget));
        self.budget()
    }

    /// Runs a parsed request directly; used by the batch runner.
    pub fn process(&self, req: &WorkloadRequest) -> noisecache::Result<Outcome> {
        self.with_engine(|e| e.process(req))
    }
}
