//! Planner stacks behind one policy interface: A*+DWA, CL-RRT and MPPI.

mod astar;
mod clrrt;
mod dwa;
mod mppi;

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, Action, RobotState, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{bilinear, Grid, GridGeometry, Interpolation};
use crate::seeding::{splitmix, stream_rng, Stream};
use crate::traversability::{risk_raster, RiskConfig, TravField};

pub use astar::{astar_plan, AStarConfig, AStarDwaPlanner, AStarPath};
pub use clrrt::{clrrt_plan, ClrrtConfig, ClrrtPlan, ClrrtPlanner, ClrrtTree, TreeNode};
pub use dwa::{dwa_step, DwaConfig};
pub use mppi::{mppi_step, mppi_weights, MppiConfig, MppiOutput, MppiPlanner};

pub type Point = (f64, f64);

/// Immutable inputs shared by every planner during one episode: the
/// risk-evaluated traversability `λ̂` per cell and the free set `λ̂ > λ_stuck`.
#[derive(Clone, Debug)]
pub struct PlannerContext {
    geometry: GridGeometry,
    risk: Grid<f64>,
    free_mask: Grid<bool>,
    free_cells: Vec<(usize, usize)>,
    best_lambda: f64,
    pub lambda_stuck: f64,
    pub goal: Point,
    pub goal_radius: f64,
    pub sim: SimConfig,
    /// Cost added per state outside the free set.
    pub stuck_penalty: f64,
}

pub const DEFAULT_STUCK_PENALTY: f64 = 1e3;

impl PlannerContext {
    pub fn new(
        geometry: GridGeometry,
        risk: Grid<f64>,
        lambda_stuck: f64,
        goal: Point,
        goal_radius: f64,
        sim: SimConfig,
    ) -> Result<Self> {
        if risk.width() != geometry.width || risk.height() != geometry.height {
            return Err(Error::Data("risk raster does not match the map geometry".into()));
        }
        sim.validate()?;
        let free_mask = risk.map(|l| *l > lambda_stuck);
        let mut free_cells = Vec::new();
        for r in 0..geometry.height {
            for c in 0..geometry.width {
                if *free_mask.get(c, r) {
                    free_cells.push((c, r));
                }
            }
        }
        let best_lambda = risk.as_slice().iter().cloned().fold(0.0, f64::max);
        Ok(PlannerContext {
            geometry,
            risk,
            free_mask,
            free_cells,
            best_lambda,
            lambda_stuck,
            goal,
            goal_radius,
            sim,
            stuck_penalty: DEFAULT_STUCK_PENALTY,
        })
    }

    /// Evaluates `risk_cfg` on every cell of `field` and builds the context.
    pub fn from_field(
        field: &TravField,
        risk_cfg: &RiskConfig,
        lambda_stuck: f64,
        goal: Point,
        goal_radius: f64,
        sim: SimConfig,
    ) -> Result<Self> {
        let risk = risk_raster(field, risk_cfg)?;
        Self::new(field.geometry(), risk, lambda_stuck, goal, goal_radius, sim)
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn risk(&self) -> &Grid<f64> {
        &self.risk
    }

    pub fn free_mask(&self) -> &Grid<bool> {
        &self.free_mask
    }

    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free_cells
    }

    /// Largest `λ̂` on the map.
    pub fn best_lambda(&self) -> f64 {
        self.best_lambda
    }

    /// `λ̂` at a world position, or `None` outside the map.
    #[inline]
    pub fn trav(&self, x: f64, y: f64) -> Option<f64> {
        let (c, r) = self.geometry.cell_of(x, y)?;
        Some(match self.sim.interpolation {
            Interpolation::Nearest => *self.risk.get(c, r),
            Interpolation::Bilinear => bilinear(&self.risk, &self.geometry, x, y),
        })
    }

    /// Whether a world position lies in a free cell.
    #[inline]
    pub fn is_free(&self, x: f64, y: f64) -> bool {
        self.geometry
            .cell_of(x, y)
            .is_some_and(|(c, r)| *self.free_mask.get(c, r))
    }

    pub fn at_goal(&self, s: &RobotState) -> bool {
        s.distance_to(self.goal) <= self.goal_radius
    }
}

/// Executed or planned state/action sequence with the λ applied at each step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<RobotState>,
    pub actions: Vec<Action>,
    pub observed_lambda: Vec<f64>,
}

impl Trajectory {
    pub fn starting_at(s: RobotState) -> Self {
        Trajectory {
            states: vec![s],
            actions: Vec::new(),
            observed_lambda: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Action, lambda: f64, next: RobotState) {
        self.actions.push(action);
        self.observed_lambda.push(lambda);
        self.states.push(next);
    }

    pub fn last_state(&self) -> Option<&RobotState> {
        self.states.last()
    }

    /// Largest deviation between recorded states and a replay through `step`.
    pub fn replay_error(&self, sim: &SimConfig) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, (a, l)) in self.actions.iter().zip(&self.observed_lambda).enumerate() {
            let next = step(&self.states[i], *a, *l, sim)?;
            let rec = &self.states[i + 1];
            worst = worst
                .max((next.x - rec.x).abs())
                .max((next.y - rec.y).abs())
                .max(crate::dynamics::wrap_angle(next.theta - rec.theta).abs());
        }
        Ok(worst)
    }

    /// Mean of the observed λ, or 0 when no step was taken.
    pub fn average_lambda(&self) -> f64 {
        if self.observed_lambda.is_empty() {
            0.0
        } else {
            self.observed_lambda.iter().sum::<f64>() / self.observed_lambda.len() as f64
        }
    }
}

/// Trajectory cost: per-state distance to the goal plus a penalty for every
/// state outside the free set, plus a weighted terminal distance.
pub fn evaluate_cost(states: &[RobotState], ctx: &PlannerContext, terminal_weight: f64) -> f64 {
    let mut cost = 0.0;
    for s in states {
        cost += s.distance_to(ctx.goal);
        if !ctx.is_free(s.x, s.y) {
            cost += ctx.stuck_penalty;
        }
    }
    if let Some(last) = states.last() {
        cost += terminal_weight * last.distance_to(ctx.goal);
    }
    cost
}

/// Planner-specific overlays for snapshot rendering.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlannerArtifacts {
    /// Global reference path (A*).
    pub reference_path: Vec<Point>,
    /// Short-horizon candidate rollouts (DWA).
    pub local_rollouts: Vec<Vec<Point>>,
    /// Tree edges (CL-RRT).
    pub tree_edges: Vec<Vec<Point>>,
    /// Current planned trajectory (CL-RRT) or nominal rollout (MPPI, DWA).
    pub plan: Vec<Point>,
    /// Lowest-cost sampled rollouts (MPPI).
    pub sampled_rollouts: Vec<Vec<Point>>,
}

/// A policy mapping the current state and predicted traversability to an action.
pub trait Planner: Send {
    fn name(&self) -> &'static str;

    /// Prepares for a new episode starting at `start`.
    fn reset(&mut self, ctx: &PlannerContext, start: &RobotState) -> Result<()>;

    fn act(&mut self, ctx: &PlannerContext, state: &RobotState) -> Result<Action>;

    fn artifacts(&self) -> PlannerArtifacts;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlannerKind {
    #[serde(rename = "astar-dwa")]
    AStarDwa,
    #[serde(rename = "clrrt")]
    Clrrt,
    #[serde(rename = "mppi")]
    Mppi,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::AStarDwa, PlannerKind::Clrrt, PlannerKind::Mppi];

    pub fn key(self) -> &'static str {
        match self {
            PlannerKind::AStarDwa => "astar-dwa",
            PlannerKind::Clrrt => "clrrt",
            PlannerKind::Mppi => "mppi",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PlannerKind::AStarDwa => "A*+DWA",
            PlannerKind::Clrrt => "CL-RRT",
            PlannerKind::Mppi => "MPPI",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "astar-dwa" => Ok(PlannerKind::AStarDwa),
            "clrrt" => Ok(PlannerKind::Clrrt),
            "mppi" => Ok(PlannerKind::Mppi),
            other => Err(Error::Config(format!("unknown planner '{other}'"))),
        }
    }
}

/// Hyperparameters of every planner stack.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfigs {
    pub astar: AStarConfig,
    pub dwa: DwaConfig,
    pub clrrt: ClrrtConfig,
    pub mppi: MppiConfig,
}

impl PlannerConfigs {
    pub fn validate(&self) -> Result<()> {
        self.dwa.validate()?;
        self.clrrt.validate()?;
        self.mppi.validate()
    }
}

/// Builds a planner whose random stream is keyed by the configured seed and `episode_seed`.
pub fn build_planner(kind: PlannerKind, cfgs: &PlannerConfigs, episode_seed: u64) -> Box<dyn Planner> {
    match kind {
        PlannerKind::AStarDwa => Box::new(AStarDwaPlanner::new(cfgs.astar.clone(), cfgs.dwa.clone())),
        PlannerKind::Clrrt => {
            let seed = splitmix(cfgs.clrrt.seed ^ episode_seed);
            Box::new(ClrrtPlanner::new(cfgs.clrrt.clone(), stream_rng(seed, Stream::Planner)))
        }
        PlannerKind::Mppi => {
            let seed = splitmix(cfgs.mppi.seed ^ episode_seed);
            Box::new(MppiPlanner::new(cfgs.mppi.clone(), stream_rng(seed, Stream::Planner)))
        }
    }
}
