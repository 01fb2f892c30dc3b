use rand::seq::index;

use super::{generate_map, Rgb, ScenarioSpec};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seeding::{stream_rng, Stream};

/// RGB, then 3×3 neighborhood mean and variance of each channel.
pub const FEATURE_DIM: usize = 9;

const TRAIN_SEED_OFFSET: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierRecord {
    pub features: [f64; FEATURE_DIM],
    pub label: u8,
}

/// Labeled data for the classifier and the per-class traversability regressors.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub records: Vec<ClassifierRecord>,
    /// `(ψ, λ)` pairs indexed by class id.
    pub gp_pairs: Vec<Vec<(f64, f64)>>,
    pub map_seeds: Vec<u64>,
}

/// Seed of the `index`-th evaluation instance.
pub fn eval_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Seed of the `index`-th training map; disjoint from evaluation seeds for
/// fewer than 2^40 instances.
pub fn training_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(TRAIN_SEED_OFFSET + index)
}

/// Appearance features of one cell; the neighborhood is clipped at the border.
pub fn cell_features(colors: &Grid<Rgb>, col: usize, row: usize) -> [f64; FEATURE_DIM] {
    let own = colors.get(col, row);
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut n = 0.0;
    for r in row.saturating_sub(1)..=(row + 1).min(colors.height() - 1) {
        for c in col.saturating_sub(1)..=(col + 1).min(colors.width() - 1) {
            let px = colors.get(c, r);
            for k in 0..3 {
                sum[k] += px[k];
                sq[k] += px[k] * px[k];
            }
            n += 1.0;
        }
    }
    let mut f = [0.0; FEATURE_DIM];
    for k in 0..3 {
        let mean = sum[k] / n;
        f[k] = own[k];
        f[3 + k] = mean;
        f[6 + k] = (sq[k] / n - mean * mean).max(0.0);
    }
    f
}

/// Generates `n_maps` maps from `template` (re-seeded per map) and extracts
/// per-cell classifier records plus per-class `(ψ, λ)` pairs capped at `gp_cap`.
pub fn build_training_set(
    n_maps: usize,
    template: &ScenarioSpec,
    seed: u64,
    gp_cap: usize,
) -> Result<TrainingSet> {
    if n_maps < 1 {
        return Err(Error::Config("training needs at least one map".into()));
    }
    if gp_cap < 1 {
        return Err(Error::Config("per-class GP cap must be positive".into()));
    }
    let n_classes = template.class_set.len();
    let mut records = Vec::new();
    let mut pairs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_classes];
    let mut map_seeds = Vec::with_capacity(n_maps);
    for j in 0..n_maps {
        let map_seed = training_seed(seed, j as u64);
        let mut spec = template.clone();
        spec.seed = map_seed;
        let map = generate_map(&spec)?;
        map_seeds.push(map_seed);
        for r in 0..map.height() {
            for c in 0..map.width() {
                let label = *map.class_id().get(c, r);
                records.push(ClassifierRecord {
                    features: cell_features(map.colors(), c, r),
                    label,
                });
                pairs[label as usize].push((*map.slope().get(c, r), *map.lambda_true().get(c, r)));
            }
        }
    }
    let mut rng = stream_rng(seed, Stream::Training);
    let gp_pairs = pairs
        .into_iter()
        .map(|class_pairs| {
            if class_pairs.len() <= gp_cap {
                return class_pairs;
            }
            let mut picked = index::sample(&mut rng, class_pairs.len(), gp_cap).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| class_pairs[i]).collect()
        })
        .collect();
    Ok(TrainingSet {
        records,
        gp_pairs,
        map_seeds,
    })
}
