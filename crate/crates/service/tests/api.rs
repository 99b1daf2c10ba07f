mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use noisecache_service::router;
use serde_json::Value;
use tower::ServiceExt;

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn post(body: String) -> Request<Body> {
    Request::post("/workload").header("content-type", "application/json").body(Body::from(body)).unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn app(total: f64) -> (tempfile::TempDir, axum::Router) {
    let (dir, session) = common::session(total);
    (dir, router(Arc::new(session)))
}

#[tokio::test]
async fn answered_workload_has_one_response_per_query() {
    let (_d, app) = app(5.0);
    let (status, body) = call(&app, post(common::workload(&[(0, 7), (2, 6)], 50.0))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["responses"].as_array().unwrap().len(), 2);
    assert_eq!(body["mechanism"], "MMM");
    for field in ["epsilon", "free_rows", "paid_rows", "timestamp"] {
        assert!(body.get(field).is_some(), "missing {field}");
    }
}

#[tokio::test]
async fn budget_tracks_charges_and_history() {
    let (_d, app) = app(5.0);
    let (_, fresh) = call(&app, get("/budget")).await;
    assert_eq!(fresh["consumed"], 0.0);
    assert_eq!(fresh["total"], 5.0);
    let (_, a) = call(&app, post(common::workload(&[(0, 8)], 50.0))).await;
    call(&app, post(common::workload(&[(0, 8)], 50.0))).await;
    let (_, after) = call(&app, get("/budget")).await;
    assert_eq!(after["consumed"], a["epsilon"]);
    let history = after["history"].as_array().unwrap();
    assert_eq!(history.len(), 2);
    assert_eq!(history[1]["mechanism"], "Free");
    assert_eq!(after["remaining"].as_f64().unwrap(), 5.0 - a["epsilon"].as_f64().unwrap());
}

#[tokio::test]
async fn exhausted_budget_is_a_conflict_without_state_change() {
    let (_d, app) = app(0.05);
    let (status, body) = call(&app, post(common::workload(&[(0, 3), (3, 5)], 10.0))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert!(body["remaining_budget"].as_f64().unwrap() < body["required_epsilon"].as_f64().unwrap());
    let (_, budget) = call(&app, get("/budget")).await;
    assert_eq!(budget["consumed"], 0.0);
    assert!(budget["history"].as_array().unwrap().is_empty());
    let (_, stats) = call(&app, get("/cache/stats?attrs=age")).await;
    assert_eq!(stats["entries"], 0);
}

#[tokio::test]
async fn malformed_interval_names_the_query() {
    let (_d, app) = app(5.0);
    let (status, body) = call(&app, post(common::workload(&[(0, 4), (5, 5)], 50.0))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["query_index"], 1);
    let (status, _) = call(&app, post("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, post(r#"{"attributes":["age"],"queries":[],"accuracy":{"kind":"worst_error","alpha":1,"beta":0.05}}"#.into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn tree_and_stats_endpoints() {
    let (_d, app) = app(5.0);
    let (status, tree) = call(&app, get("/tree?attrs=age")).await;
    assert_eq!(status, StatusCode::OK);
    let nodes = tree["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 15);
    assert_eq!(nodes[0]["ranges"]["age"], serde_json::json!([0, 8]));

    // never queried: empty stats, tree still served
    let (status, stats) = call(&app, get("/cache/stats?attrs=age,sex")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats["entries"], 0);
    let (status, _) = call(&app, get("/tree?attrs=sex,age")).await;
    assert_eq!(status, StatusCode::OK);

    call(&app, post(common::workload(&[(0, 7)], 50.0))).await;
    let (_, stats) = call(&app, get("/cache/stats?attrs=age")).await;
    let entries = stats["entries"].as_u64().unwrap();
    assert!((3..=15).contains(&entries), "{stats}");
    assert!(stats.get("y").is_none());

    let (status, _) = call(&app, get("/tree?attrs=height")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, get("/cache/stats?attrs=height")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, get("/tree")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn identical_logs_replay_identical_bodies() {
    let log = [common::workload(&[(0, 7)], 40.0), common::workload(&[(2, 6), (3, 7)], 40.0), common::workload(&[(1, 2)], 90.0)];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (_d, app) = app(5.0);
        let mut bodies = Vec::new();
        for w in &log {
            bodies.push(call(&app, post(w.clone())).await);
        }
        runs.push(bodies);
    }
    assert_eq!(runs[0], runs[1]);
}
