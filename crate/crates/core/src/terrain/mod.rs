//! Synthetic 2.5D terrain: clustered terrain classes, fractal elevation,
//! Horn inclination, ground-truth traversability and shaded appearance.

mod archive;
mod generate;
mod noise;
mod slope;
mod training;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridGeometry};

pub use archive::{read_map, write_map, MAP_MAGIC};
pub use generate::{
    assign_colors, crater_profile, generate_class_field, generate_elevation, generate_map,
    realize_traversability, MAX_GENERATION_ATTEMPTS,
};
pub use noise::{diamond_square, PerlinNoise};
pub use slope::{compute_slope_horn, horn_gradients};
pub use training::{
    build_training_set, cell_features, eval_seed, training_seed, ClassifierRecord, TrainingSet,
    FEATURE_DIM,
};

pub type Rgb = [f64; 3];

/// One terrain class and its latent traversability function
/// `f(ψ) = clamp(lambda0 − slope_gain·ψ, 0, 1)` with additive noise `N(0, noise_sigma²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainClassDef {
    pub class_id: u8,
    pub name: String,
    pub base_color: Rgb,
    pub lt_lambda0: f64,
    pub lt_slope_gain: f64,
    pub noise_sigma: f64,
}

impl TerrainClassDef {
    pub fn new(
        class_id: u8,
        name: &str,
        base_color: Rgb,
        lt_lambda0: f64,
        lt_slope_gain: f64,
        noise_sigma: f64,
    ) -> Self {
        TerrainClassDef {
            class_id,
            name: name.to_string(),
            base_color,
            lt_lambda0,
            lt_slope_gain,
            noise_sigma,
        }
    }

    /// Noise-free latent traversability at inclination `psi` (radians).
    pub fn latent(&self, psi: f64) -> f64 {
        (self.lt_lambda0 - self.lt_slope_gain * psi).clamp(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.lt_lambda0)
            && self.lt_slope_gain >= 0.0
            && self.noise_sigma >= 0.0
            && self.base_color.iter().all(|c| (0.0..=1.0).contains(c));
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "terrain class '{}' has out-of-range parameters",
                self.name
            )))
        }
    }
}

/// Rock, gravel, sand and dune: safe to hazardous.
pub fn default_classes() -> Vec<TerrainClassDef> {
    vec![
        TerrainClassDef::new(0, "rock", [0.52, 0.50, 0.48], 0.95, 0.6, 0.02),
        TerrainClassDef::new(1, "gravel", [0.62, 0.46, 0.32], 0.9, 0.8, 0.04),
        TerrainClassDef::new(2, "sand", [0.86, 0.76, 0.52], 0.8, 1.2, 0.06),
        TerrainClassDef::new(3, "dune", [0.92, 0.62, 0.36], 0.7, 1.6, 0.08),
    ]
}

pub(crate) fn validate_class_set(classes: &[TerrainClassDef]) -> Result<()> {
    if classes.is_empty() || classes.len() > u8::MAX as usize {
        return Err(Error::Config("class set must hold 1..=255 classes".into()));
    }
    for (i, c) in classes.iter().enumerate() {
        if c.class_id as usize != i {
            return Err(Error::Config(
                "class ids must be unique and contiguous from 0".into(),
            ));
        }
        c.validate()?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioFamily {
    Std,
    Hg,
    Hs,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 3] = [ScenarioFamily::Std, ScenarioFamily::Hg, ScenarioFamily::Hs];

    pub fn key(self) -> &'static str {
        match self {
            ScenarioFamily::Std => "std",
            ScenarioFamily::Hg => "hg",
            ScenarioFamily::Hs => "hs",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ScenarioFamily::Std => "Std",
            ScenarioFamily::Hg => "HG",
            ScenarioFamily::Hs => "HS",
        }
    }
}

impl std::str::FromStr for ScenarioFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "std" => Ok(ScenarioFamily::Std),
            "hg" => Ok(ScenarioFamily::Hg),
            "hs" => Ok(ScenarioFamily::Hs),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Everything needed to synthesize one problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    pub seed: u64,
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    pub class_set: Vec<TerrainClassDef>,
    pub occupancy_ratios: Vec<f64>,
    pub roughness: f64,
    pub crater_count: usize,
    pub crater_radius_m: f64,
    pub crater_depth_m: f64,
    pub sun_elevation_deg: f64,
    pub shading_strength: f64,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub time_budget_t: f64,
    pub lambda_stuck: f64,
    pub goal_radius: f64,
}

impl ScenarioSpec {
    /// The standard scenario: 32 m × 32 m at 0.5 m, start (8, 8), goal (24, 24), T = 100 s.
    pub fn standard(seed: u64) -> Self {
        ScenarioSpec {
            family: ScenarioFamily::Std,
            seed,
            width_m: 32.0,
            height_m: 32.0,
            resolution: 0.5,
            class_set: default_classes(),
            occupancy_ratios: vec![0.3, 0.3, 0.25, 0.15],
            roughness: 1.0,
            crater_count: 0,
            crater_radius_m: 3.0,
            crater_depth_m: 1.5,
            sun_elevation_deg: 60.0,
            shading_strength: 0.3,
            start: (8.0, 8.0),
            goal: (24.0, 24.0),
            time_budget_t: 100.0,
            lambda_stuck: 0.1,
            goal_radius: 0.5,
        }
    }

    /// Standard parameters with the family-specific knobs of `family` applied.
    pub fn for_family(family: ScenarioFamily, seed: u64) -> Self {
        let mut spec = Self::standard(seed);
        spec.family = family;
        match family {
            ScenarioFamily::Std => {}
            ScenarioFamily::Hg => {
                spec.crater_count = 5;
                spec.crater_radius_m = 2.5;
                spec.crater_depth_m = 1.0;
            }
            ScenarioFamily::Hs => {
                spec.sun_elevation_deg = 20.0;
                spec.shading_strength = 0.9;
            }
        }
        spec
    }

    pub fn width_cells(&self) -> usize {
        (self.width_m / self.resolution).round() as usize
    }

    pub fn height_cells(&self) -> usize {
        (self.height_m / self.resolution).round() as usize
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            width: self.width_cells(),
            height: self.height_cells(),
            resolution: self.resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.resolution > 0.0 && self.width_m > 0.0 && self.height_m > 0.0) {
            return cfg("map extent and resolution must be positive");
        }
        if self.width_cells() < 8 || self.height_cells() < 8 {
            return cfg("map must be at least 8x8 cells");
        }
        validate_class_set(&self.class_set)?;
        validate_ratios(&self.occupancy_ratios, self.class_set.len())?;
        if !(self.roughness >= 0.0) {
            return cfg("roughness must be nonnegative");
        }
        if self.crater_count > 0 && !(self.crater_radius_m > 0.0 && self.crater_depth_m >= 0.0) {
            return cfg("crater radius must be positive and depth nonnegative");
        }
        if !(0.0..=1.0).contains(&self.shading_strength) {
            return cfg("shading_strength must lie in [0, 1]");
        }
        if !(0.0..=90.0).contains(&self.sun_elevation_deg) {
            return cfg("sun elevation must lie in [0, 90] degrees");
        }
        let geom = self.geometry();
        if !geom.contains(self.start.0, self.start.1) || !geom.contains(self.goal.0, self.goal.1) {
            return cfg("start and goal must lie inside the map");
        }
        if !(self.time_budget_t > 0.0) {
            return cfg("time budget must be positive");
        }
        if !(0.0..1.0).contains(&self.lambda_stuck) {
            return cfg("lambda_stuck must lie in [0, 1)");
        }
        if !(self.goal_radius > 0.0) {
            return cfg("goal radius must be positive");
        }
        Ok(())
    }
}

pub(crate) fn validate_ratios(ratios: &[f64], n_classes: usize) -> Result<()> {
    if ratios.len() != n_classes {
        return Err(Error::Config(format!(
            "expected {n_classes} occupancy ratios, got {}",
            ratios.len()
        )));
    }
    if ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Config("occupancy ratios must be nonnegative".into()));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "occupancy ratios must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// An immutable 2.5D map instance: appearance, geometry and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    geometry: GridGeometry,
    colors: Grid<Rgb>,
    elevation: Grid<f64>,
    slope: Grid<f64>,
    class_id: Grid<u8>,
    lambda_true: Grid<f64>,
}

impl GridMap {
    pub fn new(
        resolution: f64,
        colors: Grid<Rgb>,
        elevation: Grid<f64>,
        slope: Grid<f64>,
        class_id: Grid<u8>,
        lambda_true: Grid<f64>,
    ) -> Result<Self> {
        let shaped = elevation.same_shape(&colors)
            && elevation.same_shape(&slope)
            && elevation.same_shape(&class_id)
            && elevation.same_shape(&lambda_true);
        if !shaped {
            return Err(Error::Data("map rasters differ in shape".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::Data("resolution must be positive".into()));
        }
        if slope.as_slice().iter().any(|s| !(0.0..FRAC_PI_2).contains(s)) {
            return Err(Error::Data("slope outside [0, pi/2)".into()));
        }
        if lambda_true.as_slice().iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Data("traversability outside [0, 1]".into()));
        }
        if colors
            .as_slice()
            .iter()
            .flatten()
            .any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::Data("color outside [0, 1]".into()));
        }
        if elevation.as_slice().iter().any(|z| !z.is_finite()) {
            return Err(Error::Data("non-finite elevation".into()));
        }
        Ok(GridMap {
            geometry: GridGeometry {
                width: elevation.width(),
                height: elevation.height(),
                resolution,
            },
            colors,
            elevation,
            slope,
            class_id,
            lambda_true,
        })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn colors(&self) -> &Grid<Rgb> {
        &self.colors
    }

    pub fn elevation(&self) -> &Grid<f64> {
        &self.elevation
    }

    pub fn slope(&self) -> &Grid<f64> {
        &self.slope
    }

    pub fn class_id(&self) -> &Grid<u8> {
        &self.class_id
    }

    pub fn lambda_true(&self) -> &Grid<f64> {
        &self.lambda_true
    }
}
