use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_cost, Planner, PlannerArtifacts, PlannerContext, Point, Trajectory};
use crate::dynamics::{step_clamped, Action, RobotState, SimConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    pub num_samples: usize,
    pub horizon: usize,
    /// Softmax temperature of the sample weights.
    pub temperature: f64,
    /// Perturbation standard deviations for (v, ω).
    pub noise_sigma: [f64; 2],
    pub terminal_weight: f64,
    pub seed: u64,
    /// Lowest-cost rollouts kept for rendering.
    pub top_samples: usize,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            num_samples: 512,
            horizon: 30,
            temperature: 0.1,
            noise_sigma: [0.3, 0.5],
            terminal_weight: 10.0,
            seed: 0,
            top_samples: 16,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 || self.horizon == 0 {
            return Err(Error::Config("MPPI num_samples and horizon must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("MPPI temperature must be positive".into()));
        }
        if self.noise_sigma.iter().any(|s| !(*s >= 0.0)) || !(self.terminal_weight >= 0.0) {
            return Err(Error::Config("MPPI noise and terminal weight must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MppiOutput {
    pub action: Action,
    /// Updated nominal sequence before shifting.
    pub sequence: Vec<Action>,
    /// Warm start for the next call: `sequence` shifted by one, last entry repeated.
    pub warm_start: Vec<Action>,
    pub costs: Vec<f64>,
    pub weights: Vec<f64>,
    /// Rollout of the updated nominal sequence.
    pub nominal: Trajectory,
    /// Positions of the lowest-cost samples, best first.
    pub top_rollouts: Vec<Vec<Point>>,
}

/// Softmax weights `exp(−(S_k − min S)/temperature)`, normalized.
///
/// Non-finite costs get zero weight; an error is returned if none is finite.
pub fn mppi_weights(costs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::Numeric("no MPPI sample has a finite cost".into()));
    }
    let mut w: Vec<f64> = costs
        .iter()
        .map(|c| if c.is_finite() { (-(c - min) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

fn rollout(ctx: &PlannerContext, s: &RobotState, actions: impl Iterator<Item = Action>) -> Trajectory {
    let mut traj = Trajectory::starting_at(*s);
    let mut cur = *s;
    for a in actions {
        // off the map the robot is treated as immobile; the cost penalizes it anyway
        let l = ctx.trav(cur.x, cur.y).unwrap_or(0.0);
        cur = step_clamped(&cur, a, l, ctx.sim.dt);
        traj.push(a, l, cur);
    }
    traj
}

fn perturbed<'a>(
    u: &'a [Action],
    eps: &'a [[f64; 2]],
    sim: &'a SimConfig,
) -> impl Iterator<Item = Action> + 'a {
    u.iter()
        .zip(eps)
        .map(|(a, e)| sim.clamp(Action::new(a.v + e[0], a.omega + e[1])))
}

/// `u_t ← clamp(u_t + Σ_k w_k·ε_{k,t})`; `eps` holds `K` blocks of `u.len()` rows.
fn apply_update(u: &[Action], eps: &[[f64; 2]], weights: &[f64], sim: &SimConfig) -> Vec<Action> {
    let h = u.len();
    (0..h)
        .map(|t| {
            let mut dv = 0.0;
            let mut dw = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let e = eps[k * h + t];
                dv += w * e[0];
                dw += w * e[1];
            }
            sim.clamp(Action::new(u[t].v + dv, u[t].omega + dw))
        })
        .collect()
}

/// One MPPI iteration from `s` around the nominal sequence `warm_start`.
///
/// Perturbations are drawn sequentially from `rng` (sample-major, then time)
/// before the rollouts are evaluated in parallel, so results do not depend on
/// the thread count.
pub fn mppi_step(
    ctx: &PlannerContext,
    s: &RobotState,
    cfg: &MppiConfig,
    warm_start: &[Action],
    rng: &mut ChaCha8Rng,
) -> Result<MppiOutput> {
    let h = cfg.horizon;
    if warm_start.len() != h {
        return Err(Error::Config(format!(
            "MPPI warm start has {} actions, horizon is {h}",
            warm_start.len()
        )));
    }
    let k = cfg.num_samples;
    let [sv, sw] = cfg.noise_sigma;
    let mut eps = Vec::with_capacity(k * h);
    for _ in 0..k * h {
        let zv: f64 = StandardNormal.sample(rng);
        let zw: f64 = StandardNormal.sample(rng);
        eps.push([sv * zv, sw * zw]);
    }
    let sim = ctx.sim;
    let costs: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| {
            let traj = rollout(ctx, s, perturbed(warm_start, &eps[i * h..(i + 1) * h], &sim));
            evaluate_cost(&traj.states, ctx, cfg.terminal_weight)
        })
        .collect();
    let weights = mppi_weights(&costs, cfg.temperature)?;
    let sequence = apply_update(warm_start, &eps, &weights, &sim);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| costs[*a].total_cmp(&costs[*b]).then(a.cmp(b)));
    let top_rollouts = order
        .iter()
        .take(cfg.top_samples)
        .map(|&i| {
            rollout(ctx, s, perturbed(warm_start, &eps[i * h..(i + 1) * h], &sim))
                .states
                .iter()
                .map(|st| (st.x, st.y))
                .collect()
        })
        .collect();
    let nominal = rollout(ctx, s, sequence.iter().copied());

    let mut warm = sequence[1..].to_vec();
    warm.push(sequence[h - 1]);
    Ok(MppiOutput {
        action: sequence[0],
        sequence,
        warm_start: warm,
        costs,
        weights,
        nominal,
        top_rollouts,
    })
}

/// Receding-horizon MPPI without a global path.
pub struct MppiPlanner {
    cfg: MppiConfig,
    rng: ChaCha8Rng,
    warm: Vec<Action>,
    last: Option<MppiOutput>,
}

impl MppiPlanner {
    pub fn new(cfg: MppiConfig, rng: ChaCha8Rng) -> Self {
        let warm = vec![Action::STOP; cfg.horizon];
        MppiPlanner {
            cfg,
            rng,
            warm,
            last: None,
        }
    }

    pub fn last_output(&self) -> Option<&MppiOutput> {
        self.last.as_ref()
    }
}

impl Planner for MppiPlanner {
    fn name(&self) -> &'static str {
        "mppi"
    }

    fn reset(&mut self, _ctx: &PlannerContext, _start: &RobotState) -> Result<()> {
        self.warm = vec![Action::STOP; self.cfg.horizon];
        self.last = None;
        Ok(())
    }

    fn act(&mut self, ctx: &PlannerContext, state: &RobotState) -> Result<Action> {
        let out = mppi_step(ctx, state, &self.cfg, &self.warm, &mut self.rng)?;
        self.warm = out.warm_start.clone();
        let a = out.action;
        self.last = Some(out);
        Ok(a)
    }

    fn artifacts(&self) -> PlannerArtifacts {
        match &self.last {
            Some(out) => PlannerArtifacts {
                sampled_rollouts: out.top_rollouts.clone(),
                plan: out.nominal.states.iter().map(|s| (s.x, s.y)).collect(),
                ..Default::default()
            },
            None => PlannerArtifacts::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::uniform_ctx;
    use super::*;
    use crate::seeding::{stream_rng, Stream};
    use proptest::prelude::*;

    #[test]
    fn equal_costs_give_uniform_weights_and_mean_update() {
        let w = mppi_weights(&[3.0; 4], 0.1).unwrap();
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let sim = SimConfig::default();
        let u = vec![Action::STOP; 2];
        let eps = vec![[0.1, 0.2], [0.0, 0.0], [0.3, -0.2], [0.0, 0.4], [0.2, 0.0], [0.0, 0.0], [0.2, 0.0], [0.0, 0.0]];
        let next = apply_update(&u, &eps, &w, &sim);
        assert!((next[0].v - 0.2).abs() < 1e-12);
        assert!((next[0].omega - 0.0).abs() < 1e-12);
        assert!((next[1].omega - 0.1).abs() < 1e-12);
    }

    #[test]
    fn vanishing_temperature_selects_the_minimum() {
        let w = mppi_weights(&[2.0, 0.5, 1.0], 1e-9).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_samples_one_temperature_apart() {
        let w = mppi_weights(&[0.0, 0.1], 0.1).unwrap();
        let e = (-1.0f64).exp();
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((w[0] - 0.731).abs() < 5e-4 && (w[1] - 0.269).abs() < 5e-4);
    }

    #[test]
    fn all_non_finite_costs_are_an_error() {
        assert!(matches!(
            mppi_weights(&[f64::NAN, f64::INFINITY], 0.1),
            Err(Error::Numeric(_))
        ));
        let w = mppi_weights(&[f64::NAN, 1.0], 0.1).unwrap();
        assert_eq!(w, vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn weights_normalize_and_ignore_shifts(
            costs in prop::collection::vec(0.0f64..500.0, 1..64),
            shift in -1e3f64..1e3,
            temperature in 0.01f64..10.0,
        ) {
            let w = mppi_weights(&costs, temperature).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let ws = mppi_weights(&shifted, temperature).unwrap();
            for (a, b) in w.iter().zip(&ws) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    fn small_cfg() -> MppiConfig {
        MppiConfig {
            num_samples: 64,
            horizon: 15,
            ..Default::default()
        }
    }

    #[test]
    fn step_is_deterministic_for_a_seed() {
        let ctx = uniform_ctx(0.7, &[(12, 12)], (12.0, 12.0));
        let s = RobotState::new(4.0, 4.0, 0.2);
        let cfg = small_cfg();
        let warm = vec![Action::STOP; cfg.horizon];
        let a = mppi_step(&ctx, &s, &cfg, &warm, &mut stream_rng(3, Stream::Planner)).unwrap();
        let b = mppi_step(&ctx, &s, &cfg, &warm, &mut stream_rng(3, Stream::Planner)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights.len(), cfg.num_samples);
        assert_eq!(a.top_rollouts.len(), 16);
        assert_eq!(a.warm_start[..cfg.horizon - 1], a.sequence[1..]);
        assert_eq!(a.warm_start[cfg.horizon - 1], a.sequence[cfg.horizon - 1]);
    }

    #[test]
    fn nominal_rollout_replays_exactly() {
        let ctx = uniform_ctx(0.6, &[], (12.0, 12.0));
        let cfg = small_cfg();
        let warm = vec![Action::new(0.5, 0.1); cfg.horizon];
        let out = mppi_step(&ctx, &RobotState::new(4.0, 4.0, 0.0), &cfg, &warm, &mut stream_rng(1, Stream::Planner))
            .unwrap();
        assert!(out.nominal.replay_error(&ctx.sim).unwrap() <= 1e-9);
    }

    #[test]
    fn wrong_warm_start_length_is_rejected() {
        let ctx = uniform_ctx(0.6, &[], (12.0, 12.0));
        let r = mppi_step(&ctx, &RobotState::new(4.0, 4.0, 0.0), &small_cfg(), &[], &mut stream_rng(1, Stream::Planner));
        assert!(r.is_err());
    }

    #[test]
    fn planner_drives_toward_the_goal() {
        let ctx = uniform_ctx(0.8, &[], (12.0, 4.0));
        let mut p = MppiPlanner::new(MppiConfig::default(), stream_rng(5, Stream::Planner));
        let mut s = RobotState::new(4.0, 4.0, 0.0);
        p.reset(&ctx, &s).unwrap();
        for _ in 0..150 {
            let a = p.act(&ctx, &s).unwrap();
            s = step_clamped(&s, ctx.sim.clamp(a), 0.8, 0.1);
            if ctx.at_goal(&s) {
                break;
            }
        }
        assert!(ctx.at_goal(&s), "ended at {s:?}");
    }
}
