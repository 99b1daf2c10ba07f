use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use noisecache_eval::output::{frequencies, write_freq, write_runs};
use noisecache_eval::systems::Toggles;
use noisecache_eval::{run_task, Ablation, DataKind, SystemKind, TaskConfig, TaskKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Task {
    Bfs,
    Dfs,
    Rrq,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Data {
    Uniform,
    Zipf,
    Sparse,
}

/// Runs exploration tasks against the caching engine and its baselines and
/// writes runs.csv and freq.csv.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(long, value_enum, default_value = "bfs")]
    task: Task,
    /// Data generator; defaults to zipf for bfs, sparse for dfs, uniform for rrq.
    #[arg(long, value_enum)]
    data: Option<Data>,
    #[arg(long, default_value_t = 64)]
    domain: usize,
    #[arg(long, default_value_t = 10_000)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    clients: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Queries per RRQ run.
    #[arg(long, default_value_t = 2000)]
    count: usize,
    #[arg(long, default_value_t = 2000)]
    mc_samples: usize,
    /// All clients share the first client's parameters.
    #[arg(long)]
    repeated: bool,
    /// Compare the full engine with each module switched off instead of
    /// with the baselines.
    #[arg(long)]
    ablation: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = match cli.task {
        Task::Bfs => TaskConfig::bfs(cli.domain, cli.clients, cli.runs, cli.seed),
        Task::Dfs => TaskConfig::dfs(cli.domain, cli.clients, cli.runs, cli.seed),
        Task::Rrq => TaskConfig::rrq(cli.count, cli.runs, cli.seed),
    };
    if let Some(d) = cli.data {
        cfg.data = match d {
            Data::Uniform => DataKind::Uniform,
            Data::Zipf => DataKind::zipf(),
            Data::Sparse => DataKind::PlantedSparse,
        };
    }
    if cfg.kind != TaskKind::Rrq {
        cfg.domain = cli.domain;
    }
    cfg.rows = cli.rows;
    cfg.mc_samples = cli.mc_samples;
    cfg.repeated_clients = cli.repeated;

    let systems = if cli.ablation {
        Ablation::systems()
    } else {
        vec![SystemKind::Cached(Toggles::ALL), SystemKind::Cacheless, SystemKind::NaiveCache]
    };
    let results = run_task(&cfg, &systems);

    std::fs::create_dir_all(&cli.out_dir)?;
    let runs = cli.out_dir.join("runs.csv");
    write_runs(&results, File::create(&runs).with_context(|| format!("creating {}", runs.display()))?)?;
    write_freq(&results, File::create(cli.out_dir.join("freq.csv"))?)?;

    let freq = frequencies(&results);
    for s in &systems {
        let name = s.name();
        let finals: Vec<f64> = results.iter().filter(|r| r.system == name).map(|r| r.final_epsilon()).collect();
        let mean = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
        let [free, mmm, rp, se] = freq.get(&name).copied().unwrap_or_default();
        println!("{name:<24} mean final eps {mean:>10.4}   Free {free:>5} MMM {mmm:>5} RP {rp:>5} SE {se:>5}");
    }
    println!("wrote {} and freq.csv", runs.display());
    Ok(())
}
