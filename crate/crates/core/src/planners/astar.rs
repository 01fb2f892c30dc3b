use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::dwa::{dwa_search, DwaConfig};
use super::{Planner, PlannerArtifacts, PlannerContext, Point};
use crate::dynamics::{Action, RobotState};
use crate::error::{Error, Result};

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AStarConfig {
    /// Nominal speed (m/s) turning distance into traversal time.
    pub heuristic_speed: f64,
    /// Control steps between global replans.
    pub replan_interval: usize,
}

impl Default for AStarConfig {
    fn default() -> Self {
        AStarConfig {
            heuristic_speed: 1.0,
            replan_interval: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AStarPath {
    pub cells: Vec<(usize, usize)>,
    pub waypoints: Vec<Point>,
    /// Traversal time in seconds.
    pub cost: f64,
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    index: usize,
    g: f64,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest (f, h, row-major index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-optimal path over the 8-connected grid of free cells.
///
/// An edge costs its center-to-center length over `λ̂_mid·heuristic_speed`,
/// with `λ̂_mid` the mean of the endpoint values. The start cell may be
/// blocked (the robot is already there); the goal cell may not.
pub fn astar_plan(ctx: &PlannerContext, start: (usize, usize), cfg: &AStarConfig) -> Result<AStarPath> {
    let geom = ctx.geometry();
    let (w, h) = (geom.width, geom.height);
    let goal = geom
        .cell_of(ctx.goal.0, ctx.goal.1)
        .ok_or_else(|| Error::Planning("goal outside the map".into()))?;
    if start.0 >= w || start.1 >= h {
        return Err(Error::Planning("start outside the map".into()));
    }
    if !*ctx.free_mask().get(goal.0, goal.1) {
        return Err(Error::Planning("goal cell is not traversable".into()));
    }
    let risk = ctx.risk().as_slice();
    let free = ctx.free_mask().as_slice();
    let speed = cfg.heuristic_speed;
    let best = ctx.best_lambda() * speed;
    let res = geom.resolution;
    let heuristic = |i: usize| {
        let dc = (i % w) as f64 - goal.0 as f64;
        let dr = (i / w) as f64 - goal.1 as f64;
        res * dc.hypot(dr) / best
    };

    let n = w * h;
    let start_i = start.1 * w + start.0;
    let goal_i = goal.1 * w + goal.0;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[start_i] = 0.0;
    let h0 = heuristic(start_i);
    open.push(Entry {
        f: h0,
        h: h0,
        index: start_i,
        g: 0.0,
    });
    while let Some(Entry { index, g: gi, .. }) = open.pop() {
        if closed[index] || gi > g[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_i {
            break;
        }
        let (c, r) = ((index % w) as isize, (index / w) as isize);
        for (dc, dr) in NEIGHBORS {
            let (nc, nr) = (c + dc, r + dr);
            if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if !free[j] || closed[j] {
                continue;
            }
            let len = if dc != 0 && dr != 0 {
                res * std::f64::consts::SQRT_2
            } else {
                res
            };
            let cand = gi + len / (0.5 * (risk[index] + risk[j]) * speed);
            if cand < g[j] {
                g[j] = cand;
                parent[j] = index;
                let hj = heuristic(j);
                open.push(Entry {
                    f: cand + hj,
                    h: hj,
                    index: j,
                    g: cand,
                });
            }
        }
    }
    if !closed[goal_i] {
        return Err(Error::Planning("no path to the goal".into()));
    }
    let mut cells = vec![(goal.0, goal.1)];
    let mut at = goal_i;
    while at != start_i {
        at = parent[at];
        cells.push((at % w, at / w));
    }
    cells.reverse();
    let waypoints = cells.iter().map(|&(c, r)| geom.cell_center(c, r)).collect();
    Ok(AStarPath {
        cells,
        waypoints,
        cost: g[goal_i],
    })
}

/// Hierarchical stack: A* reference path, DWA tracking its waypoints.
pub struct AStarDwaPlanner {
    astar: AStarConfig,
    dwa: DwaConfig,
    path: Vec<Point>,
    progress: usize,
    steps_since_plan: usize,
    last_rollouts: Vec<Vec<Point>>,
    last_choice: Vec<Point>,
}

impl AStarDwaPlanner {
    pub fn new(astar: AStarConfig, dwa: DwaConfig) -> Self {
        AStarDwaPlanner {
            astar,
            dwa,
            path: Vec::new(),
            progress: 0,
            steps_since_plan: 0,
            last_rollouts: Vec::new(),
            last_choice: Vec::new(),
        }
    }

    fn replan(&mut self, ctx: &PlannerContext, s: &RobotState) -> Result<()> {
        let cell = ctx
            .geometry()
            .cell_of(s.x, s.y)
            .ok_or(Error::OutOfBounds { x: s.x, y: s.y })?;
        let mut path = astar_plan(ctx, cell, &self.astar)?.waypoints;
        // the robot stands in the first cell; aim for the rest
        if path.len() > 1 {
            path.remove(0);
        }
        self.path = path;
        self.progress = 0;
        self.steps_since_plan = 0;
        Ok(())
    }

    /// Moves `progress` to the waypoint nearest the robot among those not yet passed.
    fn advance(&mut self, s: &RobotState) {
        let mut best = self.progress;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.path.iter().enumerate().skip(self.progress) {
            let d = s.distance_to(*p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.progress = best;
    }
}

impl Planner for AStarDwaPlanner {
    fn name(&self) -> &'static str {
        "astar-dwa"
    }

    fn reset(&mut self, ctx: &PlannerContext, start: &RobotState) -> Result<()> {
        self.replan(ctx, start)
    }

    fn act(&mut self, ctx: &PlannerContext, state: &RobotState) -> Result<Action> {
        if self.path.is_empty() || self.steps_since_plan >= self.astar.replan_interval.max(1) {
            self.replan(ctx, state)?;
        }
        self.steps_since_plan += 1;
        self.advance(state);
        let remaining = &self.path[self.progress..];
        let search = dwa_search(ctx, state, remaining, &self.dwa, true);
        self.last_rollouts = search.rollouts;
        self.last_choice = search.chosen;
        Ok(search.action)
    }

    fn artifacts(&self) -> PlannerArtifacts {
        PlannerArtifacts {
            reference_path: self.path.clone(),
            local_rollouts: self.last_rollouts.clone(),
            plan: self.last_choice.clone(),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::uniform_ctx;
    use super::*;

    #[test]
    fn uniform_corridor_is_octile_optimal() {
        // corridor rows 10..=12 open, everything else blocked
        let mut blocked = Vec::new();
        for r in 0..32 {
            for c in 0..32 {
                if !(10..=12).contains(&r) {
                    blocked.push((c, r));
                }
            }
        }
        let ctx = uniform_ctx(0.5, &blocked, (15.25, 5.75));
        let path = astar_plan(&ctx, (2, 10), &AStarConfig::default()).unwrap();
        // 28 columns with one row change: 27 straight + 1 diagonal
        let expected = (27.0 * 0.5 + 0.5 * std::f64::consts::SQRT_2) / 0.5;
        assert!((path.cost - expected).abs() < 1e-9);
        assert_eq!(path.cells.first(), Some(&(2, 10)));
        assert_eq!(path.cells.last(), Some(&(30, 11)));
    }

    #[test]
    fn blocked_goal_fails() {
        let ctx = uniform_ctx(0.8, &[(10, 10)], (5.25, 5.25));
        assert!(matches!(
            astar_plan(&ctx, (0, 0), &AStarConfig::default()),
            Err(Error::Planning(_))
        ));
    }

    #[test]
    fn start_equal_goal_is_a_single_waypoint() {
        let ctx = uniform_ctx(0.8, &[], (5.25, 5.25));
        let path = astar_plan(&ctx, (10, 10), &AStarConfig::default()).unwrap();
        assert_eq!(path.cells, vec![(10, 10)]);
        assert_eq!(path.cost, 0.0);
    }

    fn dijkstra(ctx: &PlannerContext, start: (usize, usize), speed: f64) -> Vec<f64> {
        let geom = ctx.geometry();
        let (w, h) = (geom.width, geom.height);
        let risk = ctx.risk().as_slice();
        let free = ctx.free_mask().as_slice();
        let mut dist = vec![f64::INFINITY; w * h];
        let mut done = vec![false; w * h];
        dist[start.1 * w + start.0] = 0.0;
        loop {
            let mut u = None;
            for i in 0..w * h {
                if !done[i] && dist[i].is_finite() && u.is_none_or(|j: usize| dist[i] < dist[j]) {
                    u = Some(i);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            let (c, r) = ((u % w) as isize, (u / w) as isize);
            for (dc, dr) in NEIGHBORS {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                    continue;
                }
                let v = nr as usize * w + nc as usize;
                if !free[v] {
                    continue;
                }
                let len = geom.resolution * ((dc * dc + dr * dr) as f64).sqrt();
                let cand = dist[u] + len / (0.5 * (risk[u] + risk[v]) * speed);
                if cand < dist[v] {
                    dist[v] = cand;
                }
            }
        }
        dist
    }

    #[test]
    fn matches_dijkstra_on_random_masks() {
        use crate::dynamics::SimConfig;
        use crate::grid::{Grid, GridGeometry};
        use crate::seeding::{stream_rng, Stream};
        use rand::Rng;

        let geom = GridGeometry {
            width: 64,
            height: 64,
            resolution: 0.5,
        };
        let cfg = AStarConfig::default();
        let mut rng = stream_rng(11, Stream::Planner);
        let mut solved = 0;
        for _ in 0..100 {
            let risk = Grid::from_fn(64, 64, |_, _| {
                if rng.random::<f64>() < 0.25 {
                    0.05
                } else {
                    rng.random_range(0.2..1.0)
                }
            });
            let start = (rng.random_range(0..64), rng.random_range(0..64));
            let goal_cell = (rng.random_range(0..64usize), rng.random_range(0..64usize));
            let goal = geom.cell_center(goal_cell.0, goal_cell.1);
            let ctx = PlannerContext::new(geom, risk, 0.1, goal, 0.5, SimConfig::default()).unwrap();
            let oracle = dijkstra(&ctx, start, cfg.heuristic_speed)[goal_cell.1 * 64 + goal_cell.0];
            match astar_plan(&ctx, start, &cfg) {
                Ok(path) => {
                    solved += 1;
                    assert!((path.cost - oracle).abs() <= 1e-9 * oracle.max(1.0));
                    // heuristic never overestimates the remaining cost along the path
                    let mut remaining = path.cost;
                    let best = ctx.best_lambda() * cfg.heuristic_speed;
                    for pair in path.cells.windows(2) {
                        let (p, q) = (pair[0], pair[1]);
                        let hp = ((p.0 as f64 - goal_cell.0 as f64).hypot(p.1 as f64 - goal_cell.1 as f64)) * 0.5 / best;
                        assert!(hp <= remaining + 1e-12);
                        let len = 0.5 * ((p.0 as f64 - q.0 as f64).hypot(p.1 as f64 - q.1 as f64));
                        let lp = *ctx.risk().get(p.0, p.1);
                        let lq = *ctx.risk().get(q.0, q.1);
                        remaining -= len / (0.5 * (lp + lq) * cfg.heuristic_speed);
                    }
                }
                Err(_) => assert!(oracle.is_infinite()),
            }
        }
        assert!(solved > 50);
    }

    #[test]
    fn walled_off_goal_fails() {
        let mut blocked = Vec::new();
        for c in 0..32 {
            blocked.push((c, 16));
        }
        let ctx = uniform_ctx(0.8, &blocked, (8.0, 12.0));
        assert!(astar_plan(&ctx, (2, 2), &AStarConfig::default()).is_err());
    }
}
