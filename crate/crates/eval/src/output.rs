//! CSV outputs: per-workload traces and mechanism frequencies.

use std::collections::BTreeMap;
use std::io::Write;

use noisecache::Mechanism;

use crate::experiment::RunResult;
use crate::systems::Label;

/// `run, workload_idx, system, epsilon, cum_epsilon, mechanism`.
pub fn write_runs(results: &[RunResult], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "workload_idx", "system", "epsilon", "cum_epsilon", "mechanism"])?;
    for r in results {
        for s in &r.steps {
            w.write_record([
                r.run.to_string(),
                s.workload.to_string(),
                r.system.clone(),
                s.epsilon.to_string(),
                s.cum_epsilon.to_string(),
                s.label.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const MECHANISMS: [Mechanism; 4] = [Mechanism::Free, Mechanism::Mmm, Mechanism::Rp, Mechanism::Se];

/// Answered-workload counts per system and mechanism, summed over runs.
pub fn frequencies(results: &[RunResult]) -> BTreeMap<String, [usize; 4]> {
    let mut out: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for r in results {
        let row = out.entry(r.system.clone()).or_default();
        for (i, &m) in MECHANISMS.iter().enumerate() {
            row[i] += r.count(Label::Answered(m));
        }
    }
    out
}

/// `system, Free, MMM, RP, SE`.
pub fn write_freq(results: &[RunResult], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["system", "Free", "MMM", "RP", "SE"])?;
    for (system, counts) in frequencies(results) {
        let mut rec = vec![system];
        rec.extend(counts.iter().map(|c| c.to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
