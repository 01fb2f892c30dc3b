//! Benchmark configuration file (TOML). Every field is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::planners::PlannerConfigs;
use crate::terrain::{ScenarioFamily, ScenarioSpec, TerrainClassDef};
use crate::traversability::{RiskConfig, TrainingConfig};

/// Values that replace the per-family scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub resolution: Option<f64>,
    pub class_set: Option<Vec<TerrainClassDef>>,
    pub occupancy_ratios: Option<Vec<f64>>,
    pub roughness: Option<f64>,
    pub crater_count: Option<usize>,
    pub crater_radius_m: Option<f64>,
    pub crater_depth_m: Option<f64>,
    pub sun_elevation_deg: Option<f64>,
    pub shading_strength: Option<f64>,
    pub start: Option<(f64, f64)>,
    pub goal: Option<(f64, f64)>,
    pub time_budget_t: Option<f64>,
    pub lambda_stuck: Option<f64>,
    pub goal_radius: Option<f64>,
}

macro_rules! apply_overrides {
    ($src:expr, $dst:expr, $($field:ident),*) => {
        $(if let Some(v) = &$src.$field { $dst.$field = v.clone(); })*
    };
}

impl ScenarioOverrides {
    pub fn apply(&self, mut spec: ScenarioSpec) -> ScenarioSpec {
        apply_overrides!(
            self, spec, width_m, height_m, resolution, class_set, occupancy_ratios, roughness,
            crater_count, crater_radius_m, crater_depth_m, sun_elevation_deg, shading_strength,
            start, goal, time_budget_t, lambda_stuck, goal_radius
        );
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Base seed: instance i uses `seed + i`; training maps derive from it too.
    pub seed: u64,
    pub instances: usize,
    /// Seconds into the episode shown by `snapshot`.
    pub t_query: f64,
    /// Applied to every scenario family.
    pub scenario: ScenarioOverrides,
    /// Applied after `scenario`, per family.
    pub std: ScenarioOverrides,
    pub hg: ScenarioOverrides,
    pub hs: ScenarioOverrides,
    pub sim: SimConfig,
    pub risk: RiskConfig,
    pub planners: PlannerConfigs,
    pub training: TrainingConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            instances: 20,
            t_query: 25.0,
            scenario: ScenarioOverrides::default(),
            std: ScenarioOverrides::default(),
            hg: ScenarioOverrides::default(),
            hs: ScenarioOverrides::default(),
            sim: SimConfig::default(),
            risk: RiskConfig::default(),
            planners: PlannerConfigs::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The scenario for `family` with file overrides applied; `seed` is the base seed.
    pub fn scenario(&self, family: ScenarioFamily) -> ScenarioSpec {
        let per_family = match family {
            ScenarioFamily::Std => &self.std,
            ScenarioFamily::Hg => &self.hg,
            ScenarioFamily::Hs => &self.hs,
        };
        per_family.apply(self.scenario.apply(ScenarioSpec::for_family(family, self.seed)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Config("instances must be >= 1".into()));
        }
        if !(self.t_query >= 0.0) {
            return Err(Error::Config("t_query must be non-negative".into()));
        }
        self.sim.validate()?;
        self.risk.validate()?;
        self.planners.validate()?;
        if self.training.n_maps == 0 {
            return Err(Error::Config("training.n_maps must be >= 1".into()));
        }
        for family in ScenarioFamily::ALL {
            self.scenario(family).validate()?;
        }
        Ok(())
    }
}
