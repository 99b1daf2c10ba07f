use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::session::{Reply, Session};

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct AttrsParam {
    attrs: Option<String>,
}

/// Engine work runs on the blocking pool so a long calibration does not
/// stall the async workers.
async fn blocking(f: impl FnOnce() -> Reply + Send + 'static) -> Reply {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Reply { status: 500, body: serde_json::json!({ "error": e.to_string() }) })
}

async fn workload(State(s): State<Arc<Session>>, body: Bytes) -> Reply {
    blocking(move || s.workload(&body)).await
}

async fn budget(State(s): State<Arc<Session>>) -> Reply {
    s.budget()
}

async fn tree(State(s): State<Arc<Session>>, Query(q): Query<AttrsParam>) -> Reply {
    blocking(move || s.tree(q.attrs.as_deref())).await
}

async fn stats(State(s): State<Arc<Session>>, Query(q): Query<AttrsParam>) -> Reply {
    blocking(move || s.cache_stats(q.attrs.as_deref())).await
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/workload", post(workload))
        .route("/budget", get(budget))
        .route("/tree", get(tree))
        .route("/cache/stats", get(stats))
        .with_state(session)
}
