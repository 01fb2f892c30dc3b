use rayon::prelude::*;

use super::classifier::{predict_class_proba, Classifier};
use super::gp::GpModel;
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::terrain::GridMap;

/// Per-cell categorical distribution over terrain classes.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalField {
    width: usize,
    height: usize,
    n_classes: usize,
    probs: Vec<f64>,
}

impl CategoricalField {
    pub fn new(width: usize, height: usize, n_classes: usize, probs: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || probs.len() != width * height * n_classes {
            return Err(Error::Data("categorical field has inconsistent shape".into()));
        }
        for cell in probs.chunks_exact(n_classes) {
            let sum: f64 = cell.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || cell.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Data("cell probabilities must sum to 1".into()));
            }
        }
        Ok(CategoricalField {
            width,
            height,
            n_classes,
            probs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, index: usize) -> &[f64] {
        &self.probs[index * self.n_classes..(index + 1) * self.n_classes]
    }
}

/// One Gaussian component of a cell's predictive mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Predictive traversability over a map: class weights and per-class GP moments.
#[derive(Clone, Debug, PartialEq)]
pub struct TravField {
    geometry: GridGeometry,
    weights: CategoricalField,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TravField {
    pub fn new(
        geometry: GridGeometry,
        weights: CategoricalField,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let n = weights.n_cells() * weights.n_classes();
        if weights.width() != geometry.width
            || weights.height() != geometry.height
            || means.len() != n
            || variances.len() != n
        {
            return Err(Error::Data("traversability field has inconsistent shape".into()));
        }
        if variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Data("negative predictive variance".into()));
        }
        Ok(TravField {
            geometry,
            weights,
            means,
            variances,
        })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn weights(&self) -> &CategoricalField {
        &self.weights
    }

    pub fn n_classes(&self) -> usize {
        self.weights.n_classes()
    }

    pub fn n_cells(&self) -> usize {
        self.weights.n_cells()
    }

    /// Mean of class `class` at `cell`.
    pub fn mean(&self, cell: usize, class: usize) -> f64 {
        self.means[cell * self.n_classes() + class]
    }

    pub fn variance(&self, cell: usize, class: usize) -> f64 {
        self.variances[cell * self.n_classes() + class]
    }

    pub fn components(&self, cell: usize) -> Vec<Component> {
        let k = self.n_classes();
        (0..k)
            .map(|c| Component {
                weight: self.weights.cell(cell)[c],
                mean: self.means[cell * k + c],
                variance: self.variances[cell * k + c],
            })
            .collect()
    }

    pub fn mixture_moments(&self, cell: usize) -> (f64, f64) {
        mixture_moments(&self.components(cell))
    }
}

/// Mean and variance of a mixture from its components' moments.
pub fn mixture_moments(components: &[Component]) -> (f64, f64) {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    let mean = components.iter().map(|c| c.weight * c.mean).sum::<f64>() / total;
    let second = components
        .iter()
        .map(|c| c.weight * (c.variance + c.mean * c.mean))
        .sum::<f64>()
        / total;
    (mean, (second - mean * mean).max(0.0))
}

/// Classifier weights fused with each class GP evaluated at every cell's inclination.
pub fn build_trav_field(classifier: &Classifier, gps: &[GpModel], map: &GridMap) -> Result<TravField> {
    let k = classifier.n_classes();
    if gps.len() != k {
        return Err(Error::Data(format!(
            "need one GP per class: {k} classes, {} models",
            gps.len()
        )));
    }
    let weights = predict_class_proba(classifier, map)?;
    let slopes = map.slope().as_slice();
    let per_class: Vec<(Vec<f64>, Vec<f64>)> = gps.par_iter().map(|gp| gp.posterior(slopes)).collect();
    let n = slopes.len();
    let mut means = vec![0.0; n * k];
    let mut variances = vec![0.0; n * k];
    for (c, (m, v)) in per_class.iter().enumerate() {
        for cell in 0..n {
            means[cell * k + c] = m[cell];
            variances[cell * k + c] = v[cell];
        }
    }
    TravField::new(map.geometry(), weights, means, variances)
}
