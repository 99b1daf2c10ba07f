#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use noisecache_service::{ServiceConfig, Session};

/// Writes a schema, a 1000-row dataset over `age` in [0, 8) and a config
/// into `dir`, and returns the config path.
pub fn write_fixture(dir: &Path, total_budget: f64) -> std::path::PathBuf {
    std::fs::write(
        dir.join("schema.json"),
        r#"{"attributes":[{"name":"age","type":"int_range","lo":0,"hi":8},
            {"name":"sex","type":"categorical","values":["f","m"]}]}"#,
    )
    .unwrap();
    let mut csv = std::fs::File::create(dir.join("data.csv")).unwrap();
    writeln!(csv, "age,sex").unwrap();
    for i in 0..1000 {
        writeln!(csv, "{},{}", (i * 3) % 8, if i % 3 == 0 { "f" } else { "m" }).unwrap();
    }
    let cfg = dir.join("config.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"dataset_path":"data.csv","schema_path":"schema.json","total_budget":{total_budget},"seed":3,"mc_samples":2000}}"#
        ),
    )
    .unwrap();
    cfg
}

pub fn session(total_budget: f64) -> (tempfile::TempDir, Session) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig::load(write_fixture(dir.path(), total_budget)).unwrap();
    let session = Session::new(cfg.build_engine().unwrap());
    (dir, session)
}

pub fn workload(ranges: &[(usize, usize)], alpha: f64) -> String {
    let queries: Vec<String> = ranges.iter().map(|(lo, hi)| format!("[[{lo},{hi}]]")).collect();
    format!(
        r#"{{"attributes":["age"],"queries":[{}],"accuracy":{{"kind":"worst_error","alpha":{alpha},"beta":0.05}}}}"#,
        queries.join(",")
    )
}
