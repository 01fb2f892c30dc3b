use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Planner, PlannerArtifacts, PlannerContext, Point, Trajectory};
use crate::dynamics::{step_clamped, wrap_angle, Action, RobotState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClrrtConfig {
    pub max_iterations: usize,
    pub goal_bias: f64,
    /// Pure-pursuit lookahead, meters.
    pub lookahead: f64,
    /// Proportional gain from remaining distance to forward speed.
    pub speed_gain: f64,
    /// Meters of position error that trigger a replan.
    pub deviation_threshold: f64,
    /// Simulated seconds per tree extension.
    pub extension_time: f64,
    /// An extension stops once it is this close to its reference point.
    pub reach_tolerance: f64,
    pub seed: u64,
}

impl Default for ClrrtConfig {
    fn default() -> Self {
        ClrrtConfig {
            max_iterations: 2000,
            goal_bias: 0.1,
            lookahead: 1.0,
            speed_gain: 1.0,
            deviation_threshold: 0.5,
            extension_time: 4.0,
            reach_tolerance: 0.3,
            seed: 0,
        }
    }
}

impl ClrrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("CL-RRT max_iterations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::Config("CL-RRT goal_bias must lie in [0, 1]".into()));
        }
        let positive = [self.lookahead, self.speed_gain, self.extension_time];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config(
                "CL-RRT lookahead, speed_gain and extension_time must be positive".into(),
            ));
        }
        if !(self.deviation_threshold >= 0.0) || !(self.reach_tolerance >= 0.0) {
            return Err(Error::Config("CL-RRT thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub state: RobotState,
    pub parent: Option<usize>,
    /// Simulated segment from the parent: actions, the λ̂ applied, and the
    /// states reached (ending at `state`).
    pub actions: Vec<Action>,
    pub lambdas: Vec<f64>,
    pub states: Vec<RobotState>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClrrtTree {
    pub nodes: Vec<TreeNode>,
}

impl ClrrtTree {
    pub fn rooted_at(s: RobotState) -> Self {
        ClrrtTree {
            nodes: vec![TreeNode {
                state: s,
                parent: None,
                actions: Vec::new(),
                lambdas: Vec::new(),
                states: Vec::new(),
            }],
        }
    }

    /// Nearest node by position; ties go to the oldest node.
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.state.x - p.0).powi(2) + (n.state.y - p.1).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Each edge as a polyline from the parent's position.
    pub fn edges(&self) -> Vec<Vec<Point>> {
        self.nodes
            .iter()
            .filter_map(|n| {
                let parent = &self.nodes[n.parent?];
                let mut line = vec![(parent.state.x, parent.state.y)];
                line.extend(n.states.iter().map(|s| (s.x, s.y)));
                Some(line)
            })
            .collect()
    }

    fn branch(&self, leaf: usize) -> Trajectory {
        let mut chain = vec![leaf];
        while let Some(p) = self.nodes[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain.reverse();
        let mut traj = Trajectory::starting_at(self.nodes[0].state);
        for &i in &chain[1..] {
            let n = &self.nodes[i];
            for ((a, l), s) in n.actions.iter().zip(&n.lambdas).zip(&n.states) {
                traj.push(*a, *l, *s);
            }
        }
        traj
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClrrtPlan {
    pub trajectory: Trajectory,
    pub tree: ClrrtTree,
    /// Iterations used, counting from 1.
    pub iterations: usize,
}

/// Pure-pursuit steering with proportional speed toward `target`.
///
/// A target behind the robot is handled by turning in place, since the
/// pursuit law has no authority there.
fn controller(s: &RobotState, target: Point, cfg: &ClrrtConfig, v_max: f64, omega_max: f64) -> Action {
    let dx = target.0 - s.x;
    let dy = target.1 - s.y;
    let eta = wrap_angle(dy.atan2(dx) - s.theta);
    if eta.cos() <= 0.0 {
        return Action::new(0.0, omega_max.copysign(eta));
    }
    let v = (cfg.speed_gain * dx.hypot(dy)).clamp(0.0, v_max);
    let omega = (2.0 * v * eta.sin() / cfg.lookahead).clamp(-omega_max, omega_max);
    Action::new(v, omega)
}

/// Outcome of one closed-loop extension.
struct Extension {
    node: TreeNode,
    reached_goal: bool,
}

fn extend(
    ctx: &PlannerContext,
    tree: &ClrrtTree,
    from: usize,
    target: Point,
    cfg: &ClrrtConfig,
) -> Option<Extension> {
    let sim = &ctx.sim;
    let steps = (cfg.extension_time / sim.dt).round().max(1.0) as usize;
    let mut cur = tree.nodes[from].state;
    let mut node = TreeNode {
        state: cur,
        parent: Some(from),
        actions: Vec::new(),
        lambdas: Vec::new(),
        states: Vec::new(),
    };
    let mut reached_goal = false;
    for _ in 0..steps {
        if cur.distance_to(target) <= cfg.reach_tolerance {
            break;
        }
        let l = ctx.trav(cur.x, cur.y)?;
        let a = controller(&cur, target, cfg, sim.v_max, sim.omega_max);
        let next = step_clamped(&cur, a, l, sim.dt);
        if !ctx.is_free(next.x, next.y) {
            break;
        }
        node.actions.push(a);
        node.lambdas.push(l);
        node.states.push(next);
        cur = next;
        if ctx.at_goal(&cur) {
            reached_goal = true;
            break;
        }
    }
    if node.states.is_empty() {
        return None;
    }
    node.state = cur;
    Some(Extension { node, reached_goal })
}

/// Grows a closed-loop RRT from `s` until a node enters the goal radius.
pub fn clrrt_plan(
    ctx: &PlannerContext,
    s: &RobotState,
    cfg: &ClrrtConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ClrrtPlan> {
    let mut tree = ClrrtTree::rooted_at(*s);
    if ctx.at_goal(s) {
        return Ok(ClrrtPlan {
            trajectory: tree.branch(0),
            tree,
            iterations: 0,
        });
    }
    let free = ctx.free_cells();
    if free.is_empty() {
        return Err(Error::Planning("no free cells to sample".into()));
    }
    let geom = ctx.geometry();
    for it in 1..=cfg.max_iterations {
        let target = if rng.random::<f64>() < cfg.goal_bias {
            ctx.goal
        } else {
            let (c, r) = free[rng.random_range(0..free.len())];
            geom.cell_center(c, r)
        };
        let near = tree.nearest(target);
        if let Some(ext) = extend(ctx, &tree, near, target, cfg) {
            tree.nodes.push(ext.node);
            if ext.reached_goal {
                let trajectory = tree.branch(tree.nodes.len() - 1);
                return Ok(ClrrtPlan {
                    trajectory,
                    tree,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::Planning(format!(
        "CL-RRT did not reach the goal in {} iterations",
        cfg.max_iterations
    )))
}

/// Executes a CL-RRT plan, replanning when the robot drifts off it.
pub struct ClrrtPlanner {
    cfg: ClrrtConfig,
    rng: ChaCha8Rng,
    plan: Option<ClrrtPlan>,
    index: usize,
}

impl ClrrtPlanner {
    pub fn new(cfg: ClrrtConfig, rng: ChaCha8Rng) -> Self {
        ClrrtPlanner {
            cfg,
            rng,
            plan: None,
            index: 0,
        }
    }

    pub fn plan(&self) -> Option<&ClrrtPlan> {
        self.plan.as_ref()
    }

    fn replan(&mut self, ctx: &PlannerContext, s: &RobotState) -> Result<()> {
        self.plan = Some(clrrt_plan(ctx, s, &self.cfg, &mut self.rng)?);
        self.index = 0;
        Ok(())
    }

    /// Returns the planned action for the current index and whether a replan happened.
    ///
    /// A replan is triggered when the robot is strictly farther than
    /// `deviation_threshold` from the expected state, or the plan ran out.
    pub fn execute_step(&mut self, ctx: &PlannerContext, s: &RobotState) -> Result<(Action, bool)> {
        let needs_plan = match &self.plan {
            None => true,
            Some(p) => {
                let traj = &p.trajectory;
                if self.index >= traj.actions.len() {
                    true
                } else {
                    let e = &traj.states[self.index];
                    s.distance_to((e.x, e.y)) > self.cfg.deviation_threshold
                }
            }
        };
        if needs_plan {
            self.replan(ctx, s)?;
        }
        let traj = &self.plan.as_ref().unwrap().trajectory;
        let a = traj.actions.get(self.index).copied().unwrap_or(Action::STOP);
        self.index += 1;
        Ok((a, needs_plan))
    }
}

impl Planner for ClrrtPlanner {
    fn name(&self) -> &'static str {
        "clrrt"
    }

    fn reset(&mut self, ctx: &PlannerContext, start: &RobotState) -> Result<()> {
        self.replan(ctx, start)
    }

    fn act(&mut self, ctx: &PlannerContext, state: &RobotState) -> Result<Action> {
        Ok(self.execute_step(ctx, state)?.0)
    }

    fn artifacts(&self) -> PlannerArtifacts {
        match &self.plan {
            Some(p) => PlannerArtifacts {
                tree_edges: p.tree.edges(),
                plan: p.trajectory.states.iter().map(|s| (s.x, s.y)).collect(),
                ..Default::default()
            },
            None => PlannerArtifacts::default(),
        }
    }
}
