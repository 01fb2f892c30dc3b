use std::f64::consts::TAU;

use rand::Rng;

use crate::grid::Grid;

/// Classic 2D gradient noise over a 256-entry permutation lattice.
#[derive(Clone, Debug)]
pub struct PerlinNoise {
    perm: [u8; 512],
    grads: [[f64; 2]; 256],
    offset: [f64; 2],
}

impl PerlinNoise {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        let mut table: Vec<u8> = (0..=255).collect();
        for i in (1..table.len()).rev() {
            let j = rng.random_range(0..=i);
            table.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = table[i & 255];
        }
        let mut grads = [[0.0; 2]; 256];
        for g in grads.iter_mut() {
            let a = rng.random::<f64>() * TAU;
            *g = [a.cos(), a.sin()];
        }
        let offset = [rng.random::<f64>() * 256.0, rng.random::<f64>() * 256.0];
        PerlinNoise {
            perm,
            grads,
            offset,
        }
    }

    fn corner(&self, xi: usize, yi: usize, dx: f64, dy: f64) -> f64 {
        let h = self.perm[self.perm[xi & 255] as usize + (yi & 255)] as usize;
        let g = self.grads[h];
        g[0] * dx + g[1] * dy
    }

    /// Single-octave noise at lattice coordinates `(x, y)`; zero on lattice points.
    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let x = x + self.offset[0];
        let y = y + self.offset[1];
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let xi = x0 as i64 as usize;
        let yi = y0 as i64 as usize;
        let n00 = self.corner(xi, yi, fx, fy);
        let n10 = self.corner(xi + 1, yi, fx - 1.0, fy);
        let n01 = self.corner(xi, yi + 1, fx, fy - 1.0);
        let n11 = self.corner(xi + 1, yi + 1, fx - 1.0, fy - 1.0);
        let u = fade(fx);
        let v = fade(fy);
        let a = n00 + u * (n10 - n00);
        let b = n01 + u * (n11 - n01);
        a + v * (b - a)
    }

    /// Fractal sum of `octaves` octaves, doubling frequency and scaling
    /// amplitude by `persistence` each octave.
    pub fn fbm(&self, x: f64, y: f64, octaves: u32, persistence: f64) -> f64 {
        let mut sum = 0.0;
        let mut amp = 1.0;
        let mut freq = 1.0;
        for _ in 0..octaves {
            sum += amp * self.noise(x * freq, y * freq);
            amp *= persistence;
            freq *= 2.0;
        }
        sum
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Midpoint-displacement surface on a `(2^levels + 1)²` grid.
///
/// Corners start uniform in `[-amplitude, amplitude]`; each level's random
/// displacement range is half the previous one.
pub fn diamond_square<R: Rng>(levels: u32, amplitude: f64, rng: &mut R) -> Grid<f64> {
    let n = (1usize << levels) + 1;
    let mut g = Grid::filled(n, n, 0.0);
    let jitter = |amp: f64, rng: &mut R| {
        if amp > 0.0 {
            rng.random_range(-amp..=amp)
        } else {
            0.0
        }
    };
    for &(c, r) in &[(0, 0), (n - 1, 0), (0, n - 1), (n - 1, n - 1)] {
        *g.get_mut(c, r) = jitter(amplitude, rng);
    }
    let mut step = n - 1;
    let mut amp = amplitude;
    while step > 1 {
        let half = step / 2;
        amp *= 0.5;
        // diamond: centers of squares
        for r in (half..n).step_by(step) {
            for c in (half..n).step_by(step) {
                let avg = (g.get(c - half, r - half)
                    + g.get(c + half, r - half)
                    + g.get(c - half, r + half)
                    + g.get(c + half, r + half))
                    / 4.0;
                *g.get_mut(c, r) = avg + jitter(amp, rng);
            }
        }
        // square: edge midpoints
        for r in (0..n).step_by(half) {
            let start = if (r / half) % 2 == 0 { half } else { 0 };
            for c in (start..n).step_by(step) {
                let mut sum = 0.0;
                let mut count = 0.0;
                if c >= half {
                    sum += g.get(c - half, r);
                    count += 1.0;
                }
                if c + half < n {
                    sum += g.get(c + half, r);
                    count += 1.0;
                }
                if r >= half {
                    sum += g.get(c, r - half);
                    count += 1.0;
                }
                if r + half < n {
                    sum += g.get(c, r + half);
                    count += 1.0;
                }
                *g.get_mut(c, r) = sum / count + jitter(amp, rng);
            }
        }
        step = half;
    }
    g
}
