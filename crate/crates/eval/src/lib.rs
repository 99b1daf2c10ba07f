//! Simulated exploration sessions for comparing caching strategies.
//!
//! A run draws a synthetic dataset, a set of clients and a client schedule
//! from one seed, then replays the session against each system. Systems only
//! see workloads; clients adapt to the noisy answers they receive.

pub mod data;
pub mod experiment;
pub mod output;
pub mod systems;
pub mod tasks;

pub use data::DataKind;
pub use experiment::{run_once, run_task, Ablation, RunResult, Step, TaskConfig, TaskKind};
pub use systems::{Label, System, SystemKind};
