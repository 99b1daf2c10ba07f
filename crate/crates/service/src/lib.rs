//! Operational surface for the engine: a JSON-over-HTTP API, a line REPL
//! that mirrors it command for command, and a batch runner for request logs.

mod batch;
mod config;
mod http;
mod repl;
mod session;

pub use batch::{run_batch, BatchSummary};
pub use config::ServiceConfig;
pub use http::router;
pub use repl::run_repl;
pub use session::{BudgetView, HistoryItem, Reply, Session};
