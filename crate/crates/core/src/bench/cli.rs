//! `terrabench` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::BenchConfig;
use super::report::{aggregate, parse_log};
use super::snapshot::{render_snapshot, MIN_SCALE};
use super::suite::{instance_seed, run_instance, run_suite, to_jsonl, train_models, with_pool};
use crate::error::{Error, Result};
use crate::planners::PlannerKind;
use crate::terrain::{generate_map, write_map, ScenarioFamily, ScenarioSpec};
use crate::traversability::{read_models, write_models, RiskMetric, TravModels};

#[derive(Parser, Debug)]
#[command(name = "terrabench", version, about = "Off-road navigation benchmark over synthetic terrain")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write map archives for evaluation instances.
    GenMaps {
        /// Scenario family; all three when omitted.
        #[arg(long, value_parser = parse_family)]
        scenario: Option<ScenarioFamily>,
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Train the classifier and GPs and write the model archive.
    Train,
    /// Run a batch of episodes and write a JSONL log.
    Run(RunArgs),
    /// Aggregate episode logs into a results table.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Render one episode to a PPM image.
    Snapshot(SnapshotArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value = "std", value_parser = parse_family)]
    scenario: ScenarioFamily,
    #[arg(long, default_value = "mppi", value_parser = parse_planner)]
    planner: PlannerKind,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    risk: Option<RiskMetric>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Model archive; models are trained from the configuration when omitted.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Include per-step trajectory arrays in the log.
    #[arg(long)]
    trajectories: bool,
    /// Log path; defaults to `<out>/<scenario>_<planner>.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SnapshotArgs {
    #[arg(long, default_value = "std", value_parser = parse_family)]
    scenario: ScenarioFamily,
    #[arg(long, default_value = "mppi", value_parser = parse_planner)]
    planner: PlannerKind,
    /// Instance index; the map seed is `seed + instance`.
    #[arg(long, default_value_t = 0)]
    instance: usize,
    /// Seconds into the episode.
    #[arg(long = "t")]
    t_query: Option<f64>,
    #[arg(long, default_value_t = MIN_SCALE)]
    scale: usize,
    #[arg(long, value_parser = parse_metric)]
    risk: Option<RiskMetric>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    models: Option<PathBuf>,
    /// Image path; defaults to `<out>/snapshot_<scenario>_<planner>_<instance>.ppm`.
    #[arg(long)]
    image: Option<PathBuf>,
}

fn parse_family(s: &str) -> std::result::Result<ScenarioFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_planner(s: &str) -> std::result::Result<PlannerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<RiskMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn jobs(cli: &Cli) -> usize {
    cli.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn models_for(cfg: &BenchConfig, path: Option<&Path>) -> Result<TravModels> {
    match path {
        Some(p) => read_models(fs::File::open(p)?),
        None => train_models(cfg),
    }
}

fn apply_risk(cfg: &mut BenchConfig, risk: Option<RiskMetric>, alpha: Option<f64>) {
    if let Some(m) = risk {
        cfg.risk.metric = m;
    }
    if let Some(a) = alpha {
        cfg.risk.alpha = a;
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let jobs = jobs(&cli);
    let out = cli.out.clone();
    match cli.command {
        Command::GenMaps { scenario, instances } => {
            if let Some(n) = instances {
                cfg.instances = n;
            }
            cfg.validate()?;
            let families = scenario.map_or(ScenarioFamily::ALL.to_vec(), |f| vec![f]);
            for family in families {
                let template = cfg.scenario(family);
                let maps = with_pool(jobs, || {
                    use rayon::prelude::*;
                    (0..cfg.instances)
                        .into_par_iter()
                        .map(|i| {
                            let seed = instance_seed(cfg.seed, i);
                            let spec = ScenarioSpec {
                                seed,
                                ..template.clone()
                            };
                            let mut buf = Vec::new();
                            write_map(&generate_map(&spec)?, &mut buf)?;
                            Ok((seed, buf))
                        })
                        .collect::<Result<Vec<_>>>()
                })??;
                for (seed, buf) in maps {
                    let path = out.join("maps").join(format!("{}_{seed}.map", family.key()));
                    write_file(&path, &buf)?;
                }
                eprintln!("wrote {} {} maps to {}", cfg.instances, family.label(), out.join("maps").display());
            }
        }
        Command::Train => {
            cfg.validate()?;
            let models = with_pool(jobs, || train_models(&cfg))??;
            let mut buf = Vec::new();
            write_models(&models, &mut buf)?;
            let path = out.join("models.trav");
            write_file(&path, &buf)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Run(args) => {
            if let Some(n) = args.instances {
                cfg.instances = n;
            }
            apply_risk(&mut cfg, args.risk, args.alpha);
            cfg.validate()?;
            let records = with_pool(jobs, || -> Result<_> {
                let models = models_for(&cfg, args.models.as_deref())?;
                run_suite(&cfg, args.scenario, args.planner, &models, cfg.instances, args.trajectories)
            })??;
            let path = args.log.unwrap_or_else(|| {
                out.join(format!("{}_{}.jsonl", args.scenario.key(), args.planner.key()))
            });
            write_file(&path, to_jsonl(&records)?.as_bytes())?;
            let successes = records.iter().filter(|r| r.success).count();
            eprintln!(
                "{} {}: {successes}/{} successful; log written to {}",
                args.scenario.label(),
                args.planner.label(),
                records.len(),
                path.display()
            );
        }
        Command::Report { logs } => {
            let mut records = Vec::new();
            for p in &logs {
                records.extend(parse_log(&fs::read_to_string(p)?)?);
            }
            print!("{}", aggregate(&records)?.render());
        }
        Command::Snapshot(args) => {
            apply_risk(&mut cfg, args.risk, args.alpha);
            if let Some(t) = args.t_query {
                cfg.t_query = t;
            }
            cfg.validate()?;
            let spec = cfg.scenario(args.scenario);
            let (map, result) = with_pool(jobs, || -> Result<_> {
                let models = models_for(&cfg, args.models.as_deref())?;
                run_instance(&cfg, args.scenario, args.planner, &models, args.instance, Some(cfg.t_query))
            })??;
            let artifacts = result.artifacts.unwrap_or_default();
            let img = render_snapshot(&map, spec.start, spec.goal, &result.trajectory, &artifacts, cfg.t_query, args.scale)?;
            let path = args.image.unwrap_or_else(|| {
                out.join(format!(
                    "snapshot_{}_{}_{}.ppm",
                    args.scenario.key(),
                    args.planner.key(),
                    args.instance
                ))
            });
            write_file(&path, &img.to_ppm_bytes())?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
///
/// Returns 0 on success, 1 for usage or configuration errors and 2 for
/// runtime failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}
