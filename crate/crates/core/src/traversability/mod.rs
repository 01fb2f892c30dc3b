//! Classify-then-regress traversability prediction and risk inference.

mod archive;
mod classifier;
mod field;
mod gp;
mod quadrature;
mod risk;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::terrain::{build_training_set, GridMap, ScenarioSpec};

pub use archive::{read_models, write_models, MODEL_MAGIC};
pub use classifier::{predict_class_proba, train_classifier, Classifier, ClassifierConfig};
pub use field::{build_trav_field, mixture_moments, CategoricalField, Component, TravField};
pub use gp::{fit_gp, gp_posterior, GpHyper, GpModel, HyperGrid};
pub use quadrature::{gauss_legendre, integrate, legendre_rule, GAUSS_LEGENDRE_POINTS};
pub use risk::{
    lower_tail_cvar, mixture_cdf, mixture_quantile, risk_of_components, risk_raster, risk_value,
    RiskConfig, RiskMetric, RiskMode,
};

/// How the pre-trained model stack is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub n_maps: usize,
    pub gp_cap: usize,
    pub classifier: ClassifierConfig,
    pub hyper_grid: HyperGrid,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_maps: 4,
            gp_cap: 256,
            classifier: ClassifierConfig::default(),
            hyper_grid: HyperGrid::default(),
        }
    }
}

/// The pre-trained classifier plus one GP per terrain class.
#[derive(Clone, Debug, PartialEq)]
pub struct TravModels {
    pub classifier: Classifier,
    pub gps: Vec<GpModel>,
}

impl TravModels {
    /// Trains on maps drawn from `template` with seeds disjoint from evaluation seeds.
    pub fn train(template: &ScenarioSpec, seed: u64, cfg: &TrainingConfig) -> Result<Self> {
        let set = build_training_set(cfg.n_maps, template, seed, cfg.gp_cap)?;
        let n_classes = template.class_set.len();
        let classifier = train_classifier(&set.records, n_classes, &cfg.classifier)?;
        let gps = set
            .gp_pairs
            .par_iter()
            .map(|pairs| fit_gp(pairs, &cfg.hyper_grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(TravModels { classifier, gps })
    }

    pub fn predict(&self, map: &GridMap) -> Result<TravField> {
        build_trav_field(&self.classifier, &self.gps, map)
    }
}
