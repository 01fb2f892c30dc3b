use serde::{Deserialize, Serialize};

use super::{PlannerContext, Point};
use crate::dynamics::{step_clamped, Action, RobotState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    pub v_samples: usize,
    pub w_samples: usize,
    pub horizon_steps: usize,
    /// Weight on the final distance to the subgoal.
    pub w_dist: f64,
    /// Weight on the mean predicted traversability along the rollout.
    pub w_trav: f64,
    /// Weight on the commanded forward speed.
    pub w_vel: f64,
    /// Meters; the subgoal is the first waypoint at least this far away.
    pub subgoal_spacing: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        DwaConfig {
            v_samples: 7,
            w_samples: 15,
            horizon_steps: 20,
            w_dist: 1.0,
            w_trav: 1.0,
            w_vel: 0.1,
            subgoal_spacing: 2.0,
        }
    }
}

impl DwaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_samples == 0 || self.w_samples == 0 || self.horizon_steps == 0 {
            return Err(Error::Config("DWA sample counts and horizon must be >= 1".into()));
        }
        if !(self.subgoal_spacing >= 0.0) {
            return Err(Error::Config("DWA subgoal spacing must be non-negative".into()));
        }
        Ok(())
    }
}

pub(crate) struct DwaSearch {
    pub action: Action,
    /// Admissible rollouts, only filled when requested.
    pub rollouts: Vec<Vec<Point>>,
    pub chosen: Vec<Point>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

fn subgoal(s: &RobotState, waypoints: &[Point], spacing: f64) -> Point {
    waypoints
        .iter()
        .copied()
        .find(|p| s.distance_to(*p) > spacing)
        .unwrap_or(waypoints[waypoints.len() - 1])
}

/// Scores the whole velocity grid and keeps the best admissible action.
pub(crate) fn dwa_search(
    ctx: &PlannerContext,
    s: &RobotState,
    waypoints: &[Point],
    cfg: &DwaConfig,
    keep_rollouts: bool,
) -> DwaSearch {
    let omega_max = ctx.sim.omega_max;
    let fallback = Action::new(0.0, omega_max);
    if waypoints.is_empty() {
        return DwaSearch {
            action: fallback,
            rollouts: Vec::new(),
            chosen: Vec::new(),
        };
    }
    let target = subgoal(s, waypoints, cfg.subgoal_spacing);
    let dt = ctx.sim.dt;

    let mut best: Option<(f64, Action, Vec<Point>)> = None;
    let mut rollouts = Vec::new();
    let mut path = Vec::with_capacity(cfg.horizon_steps + 1);
    for v in linspace(0.0, ctx.sim.v_max, cfg.v_samples) {
        for omega in linspace(-omega_max, omega_max, cfg.w_samples) {
            let a = Action::new(v, omega);
            path.clear();
            path.push((s.x, s.y));
            let mut cur = *s;
            let mut trav_sum = 0.0;
            let mut admissible = true;
            for _ in 0..cfg.horizon_steps {
                let Some(l) = ctx.trav(cur.x, cur.y) else {
                    admissible = false;
                    break;
                };
                cur = step_clamped(&cur, a, l, dt);
                if !ctx.is_free(cur.x, cur.y) {
                    admissible = false;
                    break;
                }
                trav_sum += ctx.trav(cur.x, cur.y).unwrap_or(0.0);
                path.push((cur.x, cur.y));
            }
            if !admissible {
                continue;
            }
            let mean_trav = trav_sum / cfg.horizon_steps as f64;
            let score = cfg.w_dist * cur.distance_to(target) - cfg.w_trav * mean_trav - cfg.w_vel * v;
            if keep_rollouts {
                rollouts.push(path.clone());
            }
            // strict comparison keeps the lowest grid index on ties
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, a, path.clone()));
            }
        }
    }
    match best {
        Some((_, action, chosen)) => DwaSearch {
            action,
            rollouts,
            chosen,
        },
        None => DwaSearch {
            action: fallback,
            rollouts,
            chosen: Vec::new(),
        },
    }
}

/// Local action toward the current subgoal over a sampled dynamic window.
///
/// Falls back to rotating in place at `+ω_max` when no rollout is admissible.
pub fn dwa_step(ctx: &PlannerContext, s: &RobotState, waypoints: &[Point], cfg: &DwaConfig) -> Action {
    dwa_search(ctx, s, waypoints, cfg, false).action
}

#[cfg(test)]
mod tests {
    use super::super::test_support::uniform_ctx;
    use super::*;

    #[test]
    fn corridor_ahead_goes_straight_at_full_speed() {
        let ctx = uniform_ctx(0.8, &[], (15.0, 4.0));
        let s = RobotState::new(2.0, 4.0, 0.0);
        let waypoints: Vec<Point> = (3..=15).map(|x| (x as f64, 4.0)).collect();
        let a = dwa_step(&ctx, &s, &waypoints, &DwaConfig::default());
        assert_eq!(a.v, 1.0);
        assert!(a.omega.abs() < 1e-12);
    }

    #[test]
    fn near_final_goal_picks_the_closest_rollout() {
        let ctx = uniform_ctx(0.8, &[], (8.3, 8.0));
        let s = RobotState::new(8.0, 8.0, 0.0);
        let cfg = DwaConfig::default();
        let a = dwa_step(&ctx, &s, &[(8.3, 8.0)], &cfg);
        // exhaustive oracle over the same grid
        let mut best = (f64::INFINITY, Action::STOP);
        for i in 0..cfg.v_samples {
            let v = i as f64 / (cfg.v_samples - 1) as f64;
            for j in 0..cfg.w_samples {
                let w = -1.0 + 2.0 * j as f64 / (cfg.w_samples - 1) as f64;
                let mut cur = s;
                for _ in 0..cfg.horizon_steps {
                    cur = step_clamped(&cur, Action::new(v, w), 0.8, 0.1);
                }
                let score = cur.distance_to((8.3, 8.0)) - 0.8 - 0.1 * v;
                if score < best.0 {
                    best = (score, Action::new(v, w));
                }
            }
        }
        assert_eq!(a, best.1);
        assert!(a.v < 0.5);
    }

    #[test]
    fn fully_blocked_surroundings_rotate_in_place() {
        let mut blocked = Vec::new();
        for r in 0..32 {
            for c in 0..32 {
                blocked.push((c, r));
            }
        }
        let ctx = uniform_ctx(0.8, &blocked, (15.0, 15.0));
        let s = RobotState::new(5.25, 5.25, 0.0);
        let a = dwa_step(&ctx, &s, &[(15.0, 15.0)], &DwaConfig::default());
        assert_eq!(a, Action::new(0.0, 1.0));
    }

    #[test]
    fn subgoal_is_first_waypoint_beyond_spacing() {
        let s = RobotState::new(0.0, 0.0, 0.0);
        let w = [(1.0, 0.0), (2.5, 0.0), (4.0, 0.0)];
        assert_eq!(subgoal(&s, &w, 2.0), (2.5, 0.0));
        assert_eq!(subgoal(&s, &w, 10.0), (4.0, 0.0));
    }
}
