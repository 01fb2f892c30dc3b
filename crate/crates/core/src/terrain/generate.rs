use rand::Rng;
use rand_distr::StandardNormal;

use super::noise::{diamond_square, PerlinNoise};
use super::slope::{compute_slope_horn, horn_gradients};
use super::{validate_class_set, validate_ratios, GridMap, Rgb, ScenarioSpec, TerrainClassDef};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seeding::{attempt_seed, stream_rng, Stream};

pub const MAX_GENERATION_ATTEMPTS: u64 = 100;

const PERLIN_OCTAVES: u32 = 2;
const PERLIN_BASE_CYCLES: f64 = 4.0;
const PERLIN_PERSISTENCE: f64 = 0.5;
/// Light comes from the north-west, as in conventional hillshading.
const SUN_AZIMUTH_DEG: f64 = 135.0;

/// Clustered terrain-class raster: Perlin noise thresholded at the
/// occupancy-ratio quantiles of its own empirical distribution.
pub fn generate_class_field(spec: &ScenarioSpec, seed: u64) -> Result<Grid<u8>> {
    validate_ratios(&spec.occupancy_ratios, spec.class_set.len())?;
    let (w, h) = (spec.width_cells(), spec.height_cells());
    if w < 8 || h < 8 {
        return Err(Error::Config("map must be at least 8x8 cells".into()));
    }
    let mut rng = stream_rng(seed, Stream::ClassField);
    let perlin = PerlinNoise::new(&mut rng);
    let scale = PERLIN_BASE_CYCLES / w.max(h) as f64;
    let values = Grid::from_fn(w, h, |c, r| {
        perlin.fbm(
            (c as f64 + 0.5) * scale,
            (r as f64 + 0.5) * scale,
            PERLIN_OCTAVES,
            PERLIN_PERSISTENCE,
        )
    });

    let n = w * h;
    let mut order: Vec<usize> = (0..n).collect();
    let vals = values.as_slice();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));

    let mut classes = vec![0u8; n];
    let mut cumulative = 0.0;
    let mut lo = 0usize;
    let last = spec.occupancy_ratios.len() - 1;
    for (k, ratio) in spec.occupancy_ratios.iter().enumerate() {
        cumulative += ratio;
        let hi = if k == last {
            n
        } else {
            ((cumulative * n as f64).round() as usize).clamp(lo, n)
        };
        for &idx in &order[lo..hi] {
            classes[idx] = k as u8;
        }
        lo = hi;
    }
    Grid::from_vec(w, h, classes)
}

/// Radial crater profile: parabolic bowl of `depth` inside `radius` plus a
/// Gaussian rim of height `0.25·depth` and width `radius/4` centered on the rim.
pub fn crater_profile(r: f64, radius: f64, depth: f64) -> f64 {
    let bowl = if r < radius {
        depth * (r * r / (radius * radius) - 1.0)
    } else {
        0.0
    };
    let width = radius / 4.0;
    let d = r - radius;
    bowl + 0.25 * depth * (-(d * d) / (2.0 * width * width)).exp()
}

/// Fractal elevation in meters with optional craters.
pub fn generate_elevation(spec: &ScenarioSpec, seed: u64) -> Result<Grid<f64>> {
    if !(spec.roughness >= 0.0) {
        return Err(Error::Config("roughness must be nonnegative".into()));
    }
    let (w, h) = (spec.width_cells(), spec.height_cells());
    let geom = spec.geometry();
    let mut elevation = Grid::filled(w, h, 0.0);

    if spec.roughness > 0.0 {
        let side = w.max(h);
        let mut levels = 1;
        while (1usize << levels) + 1 < side {
            levels += 1;
        }
        let mut rng = stream_rng(seed, Stream::Elevation);
        let full = diamond_square(levels, 1.0, &mut rng);
        let cropped = Grid::from_fn(w, h, |c, r| *full.get(c, r));
        let (min, max) = cropped
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
                (lo.min(*z), hi.max(*z))
            });
        let mean = cropped.as_slice().iter().sum::<f64>() / cropped.len() as f64;
        let target = spec.roughness * spec.width_m * 0.1;
        if max > min {
            let k = target / (max - min);
            elevation = cropped.map(|z| (z - mean) * k);
        }
    }

    if spec.crater_count > 0 {
        let mut rng = stream_rng(seed, Stream::Craters);
        for _ in 0..spec.crater_count {
            let cx = rng.random::<f64>() * spec.width_m;
            let cy = rng.random::<f64>() * spec.height_m;
            for r in 0..h {
                for c in 0..w {
                    let (x, y) = geom.cell_center(c, r);
                    let d = (x - cx).hypot(y - cy);
                    *elevation.get_mut(c, r) +=
                        crater_profile(d, spec.crater_radius_m, spec.crater_depth_m);
                }
            }
        }
    }
    Ok(elevation)
}

/// Ground-truth traversability `clamp(λ0 − k·ψ + ε, 0, 1)` with per-cell noise.
pub fn realize_traversability(
    class_id: &Grid<u8>,
    slope: &Grid<f64>,
    classes: &[TerrainClassDef],
    seed: u64,
) -> Result<Grid<f64>> {
    if !class_id.same_shape(slope) {
        return Err(Error::Data("class and slope rasters differ in shape".into()));
    }
    let mut rng = stream_rng(seed, Stream::TraversabilityNoise);
    let mut out = Vec::with_capacity(slope.len());
    for (&c, &psi) in class_id.as_slice().iter().zip(slope.as_slice()) {
        let def = classes
            .get(c as usize)
            .ok_or_else(|| Error::Data(format!("unknown terrain class {c}")))?;
        let z: f64 = rng.sample(StandardNormal);
        let lambda = def.lt_lambda0 - def.lt_slope_gain * psi + def.noise_sigma * z;
        out.push(lambda.clamp(0.0, 1.0));
    }
    Grid::from_vec(slope.width(), slope.height(), out)
}

/// Base class colors darkened by strength-blended Lambertian shading.
pub fn assign_colors(
    class_id: &Grid<u8>,
    elevation: &Grid<f64>,
    spec: &ScenarioSpec,
) -> Result<Grid<Rgb>> {
    if !class_id.same_shape(elevation) {
        return Err(Error::Data("class and elevation rasters differ in shape".into()));
    }
    validate_class_set(&spec.class_set)?;
    let (gx, gy) = horn_gradients(elevation, spec.resolution)?;
    let el = spec.sun_elevation_deg.to_radians();
    let az = SUN_AZIMUTH_DEG.to_radians();
    let light = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
    let strength = spec.shading_strength;
    let mut out = Vec::with_capacity(class_id.len());
    for r in 0..class_id.height() {
        for c in 0..class_id.width() {
            let (p, q) = (*gx.get(c, r), *gy.get(c, r));
            let norm = (1.0 + p * p + q * q).sqrt();
            let lambert = ((-p * light[0] - q * light[1] + light[2]) / norm).max(0.0);
            let factor = (1.0 - strength + strength * lambert).clamp(0.0, 1.0);
            let base = spec
                .class_set
                .get(*class_id.get(c, r) as usize)
                .ok_or_else(|| Error::Data("unknown terrain class".into()))?
                .base_color;
            out.push([base[0] * factor, base[1] * factor, base[2] * factor]);
        }
    }
    Grid::from_vec(class_id.width(), class_id.height(), out)
}

/// Synthesizes a full map instance, regenerating with fresh sub-seeds until
/// both the start and goal cells are traversable.
pub fn generate_map(spec: &ScenarioSpec) -> Result<GridMap> {
    spec.validate()?;
    let geom = spec.geometry();
    let start = geom.cell_of(spec.start.0, spec.start.1).expect("validated");
    let goal = geom.cell_of(spec.goal.0, spec.goal.1).expect("validated");
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let seed = attempt_seed(spec.seed, attempt);
        let class_id = generate_class_field(spec, seed)?;
        let elevation = generate_elevation(spec, seed)?;
        let slope = compute_slope_horn(&elevation, spec.resolution)?;
        let lambda = realize_traversability(&class_id, &slope, &spec.class_set, seed)?;
        let free = |(c, r): (usize, usize)| *lambda.get(c, r) > spec.lambda_stuck;
        if !(free(start) && free(goal)) {
            continue;
        }
        let colors = assign_colors(&class_id, &elevation, spec)?;
        return GridMap::new(spec.resolution, colors, elevation, slope, class_id, lambda);
    }
    Err(Error::Generation(format!(
        "start or goal still stuck after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}
