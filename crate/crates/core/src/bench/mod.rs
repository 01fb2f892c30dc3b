//! Benchmark front-end: configuration, batch runs, reports, snapshots and the CLI.

pub mod cli;
pub mod config;
pub mod report;
pub mod snapshot;
pub mod suite;

pub use config::{BenchConfig, ScenarioOverrides};
pub use report::{aggregate, parse_log, BenchmarkReport, ReportRow};
pub use snapshot::{cool_warm, render_snapshot};
pub use suite::{instance_seed, run_instance, run_suite, to_jsonl, train_models, with_pool};
