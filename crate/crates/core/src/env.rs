//! Episode engine: ground truth, reset/step, termination and metrics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{is_stuck, step, Action, RobotState, SimConfig};
use crate::error::{Error, Result};
use crate::planners::{build_planner, Planner, PlannerArtifacts, PlannerConfigs, PlannerContext, PlannerKind, Trajectory};
use crate::terrain::{generate_map, GridMap, ScenarioSpec};
use crate::traversability::{RiskConfig, TravField, TravModels};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    #[default]
    None,
    Timeout,
    Stuck,
    OutOfBounds,
    PlanningFailure,
}

impl FailureReason {
    pub fn key(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::Timeout => "timeout",
            FailureReason::Stuck => "stuck",
            FailureReason::OutOfBounds => "out_of_bounds",
            FailureReason::PlanningFailure => "planning_failure",
        }
    }
}

/// What a planner sees: its own pose and the static predicted field.
#[derive(Clone, Debug)]
pub struct Observation {
    pub state: RobotState,
    pub trav_field: Arc<TravField>,
    /// True λ applied on the last step; NaN before the first step.
    pub lambda_observed_last: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Observation,
    pub done: bool,
    pub failure_reason: FailureReason,
}

/// One navigation episode over a fixed map.
#[derive(Clone, Debug)]
pub struct Env {
    spec: ScenarioSpec,
    map: Arc<GridMap>,
    field: Arc<TravField>,
    sim: SimConfig,
    state: RobotState,
    trajectory: Trajectory,
    outcome: Option<FailureReason>,
    last_lambda: f64,
}

impl Env {
    /// Generates the map for `seed`, predicts its field and places the robot at the start.
    pub fn reset(spec: &ScenarioSpec, models: &TravModels, seed: u64, sim: SimConfig) -> Result<(Env, Observation)> {
        let spec = ScenarioSpec {
            seed,
            ..spec.clone()
        };
        let map = generate_map(&spec)?;
        let field = models.predict(&map)?;
        Self::from_parts(&spec, Arc::new(map), Arc::new(field), sim)
    }

    /// Starts an episode on an existing map and prediction.
    pub fn from_parts(
        spec: &ScenarioSpec,
        map: Arc<GridMap>,
        field: Arc<TravField>,
        sim: SimConfig,
    ) -> Result<(Env, Observation)> {
        sim.validate()?;
        if map.geometry() != field.geometry() {
            return Err(Error::Data("predicted field does not match the map".into()));
        }
        let (sx, sy) = spec.start;
        let (gx, gy) = spec.goal;
        let state = RobotState::new(sx, sy, (gy - sy).atan2(gx - sx));
        let env = Env {
            spec: spec.clone(),
            map,
            field,
            sim,
            state,
            trajectory: Trajectory::starting_at(state),
            outcome: None,
            last_lambda: f64::NAN,
        };
        let obs = env.observation();
        Ok((env, obs))
    }

    fn observation(&self) -> Observation {
        Observation {
            state: self.state,
            trav_field: Arc::clone(&self.field),
            lambda_observed_last: self.last_lambda,
        }
    }

    /// Applies `a` under the true λ at the current cell and checks termination
    /// in the order stuck, out of bounds, success, timeout.
    pub fn step(&mut self, a: Action) -> Result<StepOutcome> {
        if self.outcome.is_some() {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let geom = self.map.geometry();
        let (c, r) = geom
            .cell_of(self.state.x, self.state.y)
            .ok_or(Error::OutOfBounds {
                x: self.state.x,
                y: self.state.y,
            })?;
        let lambda = *self.map.lambda_true().get(c, r);
        let next = step(&self.state, a, lambda, &self.sim)?;
        self.trajectory.push(self.sim.clamp(a), lambda, next);
        self.state = next;
        self.last_lambda = lambda;

        let reason = if is_stuck(lambda, self.spec.lambda_stuck) {
            Some(FailureReason::Stuck)
        } else if !geom.contains(next.x, next.y) {
            Some(FailureReason::OutOfBounds)
        } else if next.distance_to(self.spec.goal) <= self.spec.goal_radius {
            Some(FailureReason::None)
        } else if self.elapsed() >= self.spec.time_budget_t - 1e-9 {
            Some(FailureReason::Timeout)
        } else {
            None
        };
        self.outcome = reason;
        Ok(StepOutcome {
            observation: self.observation(),
            done: reason.is_some(),
            failure_reason: reason.unwrap_or_default(),
        })
    }

    /// Steps taken times Δt.
    pub fn elapsed(&self) -> f64 {
        self.trajectory.actions.len() as f64 * self.sim.dt
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn map(&self) -> &Arc<GridMap> {
        &self.map
    }

    pub fn field(&self) -> &Arc<TravField> {
        &self.field
    }

    pub fn sim(&self) -> &SimConfig {
        &self.sim
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    /// Ends the episode early, e.g. after a planning failure.
    pub fn abort(&mut self, reason: FailureReason) {
        self.outcome.get_or_insert(reason);
    }

    pub fn result(&self) -> EpisodeResult {
        let failure_reason = self.outcome.unwrap_or(FailureReason::Timeout);
        EpisodeResult {
            success: self.outcome == Some(FailureReason::None),
            failure_reason,
            total_time: self.elapsed(),
            avg_traversability: self.trajectory.average_lambda(),
            n_steps: self.trajectory.actions.len(),
            trajectory: self.trajectory.clone(),
            artifacts: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub failure_reason: FailureReason,
    /// Seconds.
    pub total_time: f64,
    /// Mean true λ over the executed steps; 0 if none.
    pub avg_traversability: f64,
    pub n_steps: usize,
    pub trajectory: Trajectory,
    /// Planner overlays captured at the requested time, if any.
    pub artifacts: Option<PlannerArtifacts>,
}

/// Drives `planner` on `env` until termination.
///
/// A planning error ends the episode as a planning failure at the current
/// time; other errors propagate. With `capture_at = Some(t)`, the planner's
/// artifacts from the step at `t` (or the last step) are kept.
pub fn run_with_planner(
    env: &mut Env,
    ctx: &PlannerContext,
    planner: &mut dyn Planner,
    capture_at: Option<f64>,
) -> Result<EpisodeResult> {
    let capture_step = capture_at.map(|t| (t.max(0.0) / env.sim().dt + 1e-9).floor() as usize);
    let mut artifacts = None;
    match planner.reset(ctx, env.state()) {
        Ok(()) => {}
        Err(Error::Planning(_)) => env.abort(FailureReason::PlanningFailure),
        Err(e) => return Err(e),
    }
    while !env.is_done() {
        let s = *env.state();
        let a = match planner.act(ctx, &s) {
            Ok(a) => a,
            Err(Error::Planning(_)) => {
                env.abort(FailureReason::PlanningFailure);
                break;
            }
            Err(e) => return Err(e),
        };
        if capture_step == Some(env.trajectory().actions.len()) {
            artifacts = Some(planner.artifacts());
        }
        env.step(a)?;
    }
    if capture_at.is_some() && artifacts.is_none() {
        artifacts = Some(planner.artifacts());
    }
    let mut result = env.result();
    result.artifacts = artifacts;
    Ok(result)
}

/// Everything needed to run one episode.
#[derive(Clone, Debug)]
pub struct EpisodeSetup {
    pub kind: PlannerKind,
    pub planners: PlannerConfigs,
    pub risk: RiskConfig,
    pub sim: SimConfig,
}

/// Generates the instance map for `seed`, predicts it, and runs one planner on it.
pub fn run_episode(
    spec: &ScenarioSpec,
    models: &TravModels,
    setup: &EpisodeSetup,
    seed: u64,
    capture_at: Option<f64>,
) -> Result<EpisodeResult> {
    let (mut env, _) = Env::reset(spec, models, seed, setup.sim)?;
    let ctx = PlannerContext::from_field(
        env.field(),
        &setup.risk,
        spec.lambda_stuck,
        spec.goal,
        spec.goal_radius,
        setup.sim,
    )?;
    let mut planner = build_planner(setup.kind, &setup.planners, seed);
    run_with_planner(&mut env, &ctx, planner.as_mut(), capture_at)
}

/// Per-step arrays of an executed trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl TrajectoryLog {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        TrajectoryLog {
            x: traj.states.iter().map(|s| s.x).collect(),
            y: traj.states.iter().map(|s| s.y).collect(),
            theta: traj.states.iter().map(|s| s.theta).collect(),
            t: traj.states.iter().map(|s| s.t).collect(),
            v: traj.actions.iter().map(|a| a.v).collect(),
            omega: traj.actions.iter().map(|a| a.omega).collect(),
            lambda: traj.observed_lambda.clone(),
        }
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let n = self.x.len();
        let m = self.v.len();
        let consistent = n > 0
            && [self.y.len(), self.theta.len(), self.t.len()].iter().all(|l| *l == n)
            && self.omega.len() == m
            && self.lambda.len() == m
            && m + 1 == n;
        if !consistent {
            return Err(Error::Format("inconsistent trajectory arrays".into()));
        }
        let states = (0..n)
            .map(|i| RobotState {
                x: self.x[i],
                y: self.y[i],
                theta: self.theta[i],
                t: self.t[i],
            })
            .collect();
        let actions = (0..m).map(|i| Action::new(self.v[i], self.omega[i])).collect();
        Ok(Trajectory {
            states,
            actions,
            observed_lambda: self.lambda.clone(),
        })
    }
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub seed: u64,
    pub planner: String,
    pub success: bool,
    pub failure_reason: FailureReason,
    pub total_time_s: f64,
    pub avg_traversability: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryLog>,
}

impl EpisodeRecord {
    pub fn new(scenario: &str, planner: &str, seed: u64, result: &EpisodeResult, with_trajectory: bool) -> Self {
        EpisodeRecord {
            scenario: scenario.to_string(),
            seed,
            planner: planner.to_string(),
            success: result.success,
            failure_reason: result.failure_reason,
            total_time_s: result.total_time,
            avg_traversability: result.avg_traversability,
            n_steps: result.n_steps,
            trajectory: with_trajectory.then(|| TrajectoryLog::from_trajectory(&result.trajectory)),
        }
    }
}
