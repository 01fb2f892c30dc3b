//! Batch execution of episodes over instance seeds.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::BenchConfig;
use crate::env::{run_with_planner, Env, EpisodeRecord, EpisodeResult};
use crate::error::{Error, Result};
use crate::planners::{build_planner, PlannerContext, PlannerKind};
use crate::terrain::{GridMap, ScenarioFamily};
use crate::traversability::TravModels;

/// Seed of evaluation instance `i`.
pub fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Trains the model stack on maps of the standard scenario.
pub fn train_models(cfg: &BenchConfig) -> Result<TravModels> {
    TravModels::train(&cfg.scenario(ScenarioFamily::Std), cfg.seed, &cfg.training)
}

/// Runs `f` on a pool of `jobs` threads.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Err(Error::Config("--jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs instance `instance` and returns its map along with the result.
pub fn run_instance(
    cfg: &BenchConfig,
    family: ScenarioFamily,
    kind: PlannerKind,
    models: &TravModels,
    instance: usize,
    capture_at: Option<f64>,
) -> Result<(Arc<GridMap>, EpisodeResult)> {
    let spec = cfg.scenario(family);
    let seed = instance_seed(cfg.seed, instance);
    let (mut env, _) = Env::reset(&spec, models, seed, cfg.sim)?;
    let ctx = PlannerContext::from_field(
        env.field(),
        &cfg.risk,
        spec.lambda_stuck,
        spec.goal,
        spec.goal_radius,
        cfg.sim,
    )?;
    let mut planner = build_planner(kind, &cfg.planners, seed);
    let result = run_with_planner(&mut env, &ctx, planner.as_mut(), capture_at)?;
    Ok((Arc::clone(env.map()), result))
}

/// Runs `instances` episodes in parallel; records come back in instance order.
pub fn run_suite(
    cfg: &BenchConfig,
    family: ScenarioFamily,
    kind: PlannerKind,
    models: &TravModels,
    instances: usize,
    with_trajectories: bool,
) -> Result<Vec<EpisodeRecord>> {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let (_, result) = run_instance(cfg, family, kind, models, i, None)?;
            Ok(EpisodeRecord::new(
                family.key(),
                kind.key(),
                instance_seed(cfg.seed, i),
                &result,
                with_trajectories,
            ))
        })
        .collect()
}

/// One JSON object per line.
pub fn to_jsonl(records: &[EpisodeRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Data(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
