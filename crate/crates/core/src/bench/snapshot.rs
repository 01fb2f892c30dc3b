//! Top-down episode snapshots: shaded map, planner overlays, executed path, markers.

use crate::error::{Error, Result};
use crate::planners::{PlannerArtifacts, Point, Trajectory};
use crate::ppm::{Color, Image};
use crate::terrain::GridMap;

pub const MIN_SCALE: usize = 8;

pub const START_COLOR: Color = [220, 20, 20];
pub const GOAL_COLOR: Color = [255, 0, 255];
pub const POSE_COLOR: Color = [0, 220, 0];
pub const REFERENCE_COLOR: Color = [255, 225, 0];
pub const TREE_COLOR: Color = [200, 200, 200];
pub const SAMPLE_COLOR: Color = [255, 255, 255];
pub const ROLLOUT_COLOR: Color = [120, 230, 255];

/// Diverging blue-to-red ramp: λ = 1 maps to the cool end, λ = 0 to the warm end.
pub fn cool_warm(lambda: f64) -> Color {
    const COOL: [f64; 3] = [59.0, 76.0, 192.0];
    const MID: [f64; 3] = [221.0, 221.0, 221.0];
    const WARM: [f64; 3] = [180.0, 4.0, 38.0];
    let t = 1.0 - lambda.clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 { (COOL, MID, 2.0 * t) } else { (MID, WARM, 2.0 * t - 1.0) };
    let mut c = [0u8; 3];
    for i in 0..3 {
        c[i] = (a[i] + (b[i] - a[i]) * u).round() as u8;
    }
    c
}

struct Canvas {
    img: Image,
    px_per_m: f64,
    height_px: f64,
}

impl Canvas {
    fn to_px(&self, p: Point) -> (f64, f64) {
        (p.0 * self.px_per_m, self.height_px - p.1 * self.px_per_m)
    }

    fn dot(&mut self, x: f64, y: f64, half: i64, c: Color) {
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        for dy in -half..=half {
            for dx in -half..=half {
                self.img.put(cx + dx, cy + dy, c);
            }
        }
    }

    /// Draws a polyline; with `dash = Some((on, off))` only the "on" stretches are painted.
    fn polyline(&mut self, pts: &[Point], half: i64, c: Color, dash: Option<(f64, f64)>) {
        let mut run = 0.0;
        for w in pts.windows(2) {
            let (x0, y0) = self.to_px(w[0]);
            let (x1, y1) = self.to_px(w[1]);
            let len = (x1 - x0).hypot(y1 - y0);
            let n = (len.ceil() as usize).max(1);
            for i in 0..=n {
                let u = i as f64 / n as f64;
                let painted = match dash {
                    Some((on, off)) => (run + u * len) % (on + off) < on,
                    None => true,
                };
                if painted {
                    self.dot(x0 + u * (x1 - x0), y0 + u * (y1 - y0), half, c);
                }
            }
            run += len;
        }
    }

    fn disk(&mut self, p: Point, radius: f64, c: Color) {
        let (cx, cy) = self.to_px(p);
        let r = radius.ceil() as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64) <= radius * radius {
                    self.img.put(cx.floor() as i64 + dx, cy.floor() as i64 + dy, c);
                }
            }
        }
    }

    fn cross(&mut self, p: Point, arm: f64, c: Color) {
        let (cx, cy) = self.to_px(p);
        let n = arm.ceil() as i64;
        for i in -n..=n {
            let f = i as f64;
            self.dot(cx + f, cy + f, 1, c);
            self.dot(cx + f, cy - f, 1, c);
        }
    }
}

/// Index of the last recorded state at or before `t_query`, clamped to the final state.
fn pose_index(traj: &Trajectory, t_query: f64) -> usize {
    let t0 = traj.states.first().map_or(0.0, |s| s.t);
    traj.states
        .iter()
        .rposition(|s| s.t - t0 <= t_query + 1e-9)
        .unwrap_or(0)
}

/// Renders one episode at time `t_query` with `scale` pixels per cell.
pub fn render_snapshot(
    map: &GridMap,
    start: Point,
    goal: Point,
    traj: &Trajectory,
    artifacts: &PlannerArtifacts,
    t_query: f64,
    scale: usize,
) -> Result<Image> {
    if scale < MIN_SCALE {
        return Err(Error::Config(format!("snapshot scale must be >= {MIN_SCALE}")));
    }
    let (w, h) = (map.width(), map.height());
    let mut img = Image::new(w * scale, h * scale, [0, 0, 0]);
    for r in 0..h {
        for c in 0..w {
            let rgb = map.colors().get(c, r);
            let px = rgb.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
            let top = (h - 1 - r) * scale;
            for y in top..top + scale {
                for x in c * scale..(c + 1) * scale {
                    img.put(x as i64, y as i64, px);
                }
            }
        }
    }
    let mut cv = Canvas {
        img,
        px_per_m: scale as f64 / map.resolution(),
        height_px: (h * scale) as f64,
    };
    let s = scale as f64;

    for edge in &artifacts.tree_edges {
        cv.polyline(edge, 0, TREE_COLOR, None);
    }
    for roll in &artifacts.local_rollouts {
        cv.polyline(roll, 0, ROLLOUT_COLOR, None);
    }
    for roll in &artifacts.sampled_rollouts {
        cv.polyline(roll, 0, SAMPLE_COLOR, None);
    }
    if !artifacts.reference_path.is_empty() {
        cv.polyline(&artifacts.reference_path, 1, REFERENCE_COLOR, Some((0.75 * s, 0.5 * s)));
    }

    let k = pose_index(traj, t_query);
    for i in 0..k.min(traj.observed_lambda.len()) {
        let a = &traj.states[i];
        let b = &traj.states[i + 1];
        cv.polyline(&[(a.x, a.y), (b.x, b.y)], 1, cool_warm(traj.observed_lambda[i]), None);
    }

    cv.disk(start, 0.6 * s, START_COLOR);
    cv.cross(goal, 0.6 * s, GOAL_COLOR);
    if !traj.actions.is_empty() {
        let p = &traj.states[k];
        cv.disk((p.x, p.y), 0.5 * s, POSE_COLOR);
    }
    Ok(cv.img)
}
