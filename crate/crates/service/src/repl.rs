use std::io::{BufRead, Write};

use crate::session::{Reply, Session};

const HELP: &str = "\
commands:
  query <workload json>     same as POST /workload
  budget                    same as GET /budget
  tree <attr,attr,...>      same as GET /tree?attrs=...
  stats <attr,attr,...>     same as GET /cache/stats?attrs=...
  reset <seed> <budget>     clear caches and ledger
  help | quit";

fn dispatch(session: &Session, line: &str) -> Option<Reply> {
    let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    let bad = |msg: &str| Reply { status: 400, body: serde_json::json!({ "error": msg }) };
    Some(match cmd {
        "query" => session.workload(rest.as_bytes()),
        "budget" => session.budget(),
        "tree" => session.tree(Some(rest)),
        "stats" => session.cache_stats(Some(rest)),
        "reset" => {
            let mut it = rest.split_whitespace();
            match (it.next().map(str::parse::<u64>), it.next().map(str::parse::<f64>)) {
                (Some(Ok(seed)), Some(Ok(b))) => session.reset(seed, b),
                _ => bad("usage: reset <seed> <budget>"),
            }
        }
        _ => return None,
    })
}

/// Reads commands line by line and prints `<status> <json>` for each.
pub fn run_repl(session: &Session, input: impl BufRead, mut output: impl Write, prompt: bool) -> std::io::Result<()> {
    let mut lines = input.lines();
    loop {
        if prompt {
            write!(output, "> ")?;
            output.flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line?;
        let line = line.trim();
        match line {
            "" => continue,
            "quit" | "exit" => break,
            "help" => writeln!(output, "{HELP}")?,
            _ => match dispatch(session, line) {
                Some(r) => writeln!(output, "{} {}", r.status, r.body)?,
                None => writeln!(output, "unknown command `{line}`; try `help`")?,
            },
        }
    }
    Ok(())
}
