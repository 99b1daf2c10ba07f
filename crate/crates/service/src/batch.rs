use std::io::{BufRead, Write};

use anyhow::Context;
use noisecache::{Outcome, WorkloadRequest};

use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchSummary {
    pub answered: usize,
    pub rejected: usize,
    pub consumed: f64,
}

/// Replays a JSON-lines request log and writes one CSV row per request:
/// `index, mechanism, epsilon, cumulative_epsilon`. Rejected requests are
/// listed with mechanism `Rejected` and no charge. Blank lines and lines
/// starting with `#` are skipped and do not take an index.
pub fn run_batch(session: &Session, input: impl BufRead, output: impl Write) -> anyhow::Result<BatchSummary> {
    let mut out = csv::Writer::from_writer(output);
    out.write_record(["index", "mechanism", "epsilon", "cumulative_epsilon"])?;
    let mut summary = BatchSummary::default();
    let mut index = 0usize;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let req: WorkloadRequest =
            serde_json::from_str(line).with_context(|| format!("line {}: malformed workload", n + 1))?;
        let outcome = session.process(&req).with_context(|| format!("line {}", n + 1))?;
        let (mechanism, eps) = match &outcome {
            Outcome::Answered(a) => {
                summary.answered += 1;
                (a.mechanism.as_str(), a.epsilon)
            }
            Outcome::Rejected(_) => {
                summary.rejected += 1;
                ("Rejected", 0.0)
            }
        };
        summary.consumed += eps;
        out.write_record([index.to_string(), mechanism.to_string(), eps.to_string(), summary.consumed.to_string()])?;
        index += 1;
    }
    out.flush()?;
    Ok(summary)
}
