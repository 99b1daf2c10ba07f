use std::fs::File;
use std::io::{self, BufReader, IsTerminal};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use noisecache_service::{router, run_batch, run_repl, ServiceConfig, Session};

/// Differentially private range-count answering with a noisy-answer cache.
///
/// Without --serve or --batch an interactive prompt reads commands from stdin.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Service config (JSON): engine settings, dataset_path, schema_path.
    #[arg(long)]
    config: PathBuf,
    /// Serve the HTTP API on this address, e.g. 127.0.0.1:8080.
    #[arg(long, conflicts_with = "batch")]
    serve: Option<SocketAddr>,
    /// Replay a JSON-lines workload log.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// CSV destination for --batch; stdout when omitted.
    #[arg(long, requires = "batch")]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let cli = Cli::parse();
    let cfg = ServiceConfig::load(&cli.config)?;
    let session = Arc::new(Session::new(cfg.build_engine()?));

    if let Some(addr) = cli.serve {
        let rt = tokio::runtime::Runtime::new()?;
        return rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, router(session)).await?;
            Ok(())
        });
    }
    if let Some(path) = cli.batch {
        let input = BufReader::new(File::open(&path).with_context(|| format!("opening {}", path.display()))?);
        let summary = match cli.out {
            Some(out) => run_batch(&session, input, File::create(&out)?)?,
            None => run_batch(&session, input, io::stdout().lock())?,
        };
        tracing::info!(answered = summary.answered, rejected = summary.rejected, consumed = summary.consumed, "batch done");
        return Ok(());
    }
    let stdin = io::stdin();
    let prompt = stdin.is_terminal();
    run_repl(&session, stdin.lock(), io::stdout().lock(), prompt)?;
    Ok(())
}
