//! Shallow pixel-wise terrain classifier: multinomial logistic regression on
//! standardized appearance features, fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terrain::{cell_features, ClassifierRecord, GridMap, FEATURE_DIM};

use super::CategoricalField;

const MIN_RECORDS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            iterations: 300,
            learning_rate: 1.0,
            l2: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    n_classes: usize,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
    /// Row-major `n_classes × (n_features + 1)`; the last column is the bias.
    weights: Vec<f64>,
}

impl Classifier {
    /// Zero weights: every prediction is uniform.
    pub fn untrained(n_classes: usize, n_features: usize) -> Self {
        Classifier {
            n_classes,
            feature_mean: vec![0.0; n_features],
            feature_scale: vec![1.0; n_features],
            weights: vec![0.0; n_classes * (n_features + 1)],
        }
    }

    pub fn from_parts(
        n_classes: usize,
        feature_mean: Vec<f64>,
        feature_scale: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let d = feature_mean.len();
        if n_classes < 1 || feature_scale.len() != d || weights.len() != n_classes * (d + 1) {
            return Err(Error::Data("inconsistent classifier parameter shapes".into()));
        }
        if feature_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Data("feature scales must be positive".into()));
        }
        Ok(Classifier {
            n_classes,
            feature_mean,
            feature_scale,
            weights,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn feature_mean(&self) -> &[f64] {
        &self.feature_mean
    }

    pub fn feature_scale(&self) -> &[f64] {
        &self.feature_scale
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn standardize(&self, features: &[f64], out: &mut [f64]) {
        for (i, f) in features.iter().enumerate() {
            out[i] = (f - self.feature_mean[i]) / self.feature_scale[i];
        }
    }

    /// Writes class probabilities for standardized features `x` into `probs`.
    fn softmax_into(&self, x: &[f64], probs: &mut [f64]) {
        let d = x.len();
        let mut max = f64::NEG_INFINITY;
        for k in 0..self.n_classes {
            let row = &self.weights[k * (d + 1)..(k + 1) * (d + 1)];
            let logit = row[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[d];
            probs[k] = logit;
            max = max.max(logit);
        }
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
            sum += *p;
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
    }

    /// Class probabilities for one raw feature vector.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_features() {
            return Err(Error::Data(format!(
                "classifier expects {} features, got {}",
                self.n_features(),
                features.len()
            )));
        }
        let mut x = vec![0.0; features.len()];
        self.standardize(features, &mut x);
        let mut probs = vec![0.0; self.n_classes];
        self.softmax_into(&x, &mut probs);
        Ok(probs)
    }
}

pub fn train_classifier(
    records: &[ClassifierRecord],
    n_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<Classifier> {
    if records.len() < MIN_RECORDS {
        return Err(Error::Training(format!(
            "classifier needs at least {MIN_RECORDS} records, got {}",
            records.len()
        )));
    }
    if records.iter().any(|r| r.label as usize >= n_classes) {
        return Err(Error::Training("record label outside the class set".into()));
    }
    let first = records[0].label;
    if records.iter().all(|r| r.label == first) {
        return Err(Error::Training("training table holds a single class".into()));
    }

    let d = FEATURE_DIM;
    let n = records.len() as f64;
    let mut mean = vec![0.0; d];
    for r in records {
        for i in 0..d {
            mean[i] += r.features[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![0.0; d];
    for r in records {
        for i in 0..d {
            scale[i] += (r.features[i] - mean[i]).powi(2);
        }
    }
    for s in scale.iter_mut() {
        *s = (*s / n).sqrt();
        if *s < 1e-9 {
            *s = 1.0;
        }
    }

    let mut model = Classifier::untrained(n_classes, d);
    model.feature_mean = mean;
    model.feature_scale = scale;
    let xs: Vec<[f64; FEATURE_DIM]> = records
        .iter()
        .map(|r| {
            let mut x = [0.0; FEATURE_DIM];
            model.standardize(&r.features, &mut x);
            x
        })
        .collect();

    let stride = d + 1;
    let mut grad = vec![0.0; n_classes * stride];
    let mut probs = vec![0.0; n_classes];
    for _ in 0..cfg.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, r) in xs.iter().zip(records) {
            model.softmax_into(x, &mut probs);
            for k in 0..n_classes {
                let err = probs[k] - if r.label as usize == k { 1.0 } else { 0.0 };
                let g = &mut grad[k * stride..(k + 1) * stride];
                for i in 0..d {
                    g[i] += err * x[i];
                }
                g[d] += err;
            }
        }
        for k in 0..n_classes {
            for i in 0..stride {
                let idx = k * stride + i;
                let reg = if i < d { cfg.l2 * model.weights[idx] } else { 0.0 };
                model.weights[idx] -= cfg.learning_rate * (grad[idx] / n + reg);
            }
        }
    }
    Ok(model)
}

/// Per-cell class distribution over the whole map.
pub fn predict_class_proba(classifier: &Classifier, map: &GridMap) -> Result<CategoricalField> {
    if classifier.n_features() != FEATURE_DIM {
        return Err(Error::Data(format!(
            "classifier trained on {} features, maps provide {FEATURE_DIM}",
            classifier.n_features()
        )));
    }
    let k = classifier.n_classes();
    let mut probs = vec![0.0; map.width() * map.height() * k];
    let mut x = [0.0; FEATURE_DIM];
    for r in 0..map.height() {
        for c in 0..map.width() {
            let f = cell_features(map.colors(), c, r);
            classifier.standardize(&f, &mut x);
            let cell = r * map.width() + c;
            classifier.softmax_into(&x, &mut probs[cell * k..(cell + 1) * k]);
        }
    }
    CategoricalField::new(map.width(), map.height(), k, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::seeding::{stream_rng, Stream};

    fn separable_table(n: usize, swap: bool) -> Vec<ClassifierRecord> {
        let mut rng = stream_rng(5, Stream::Training);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let base = if label == 0 { 0.2 } else { 0.7 };
                let mut features = [0.0; FEATURE_DIM];
                for f in features.iter_mut() {
                    *f = base + rng.random_range(-0.1..0.1);
                }
                ClassifierRecord {
                    features,
                    label: if swap { 1 - label } else { label },
                }
            })
            .collect()
    }

    fn accuracy(model: &Classifier, records: &[ClassifierRecord]) -> f64 {
        let hits = records
            .iter()
            .filter(|r| {
                let p = model.predict_proba(&r.features).unwrap();
                let best = (0..p.len()).fold(0, |b, k| if p[k] > p[b] { k } else { b });
                best == r.label as usize
            })
            .count();
        hits as f64 / records.len() as f64
    }

    #[test]
    fn separable_data_is_learned() {
        let table = separable_table(400, false);
        let model = train_classifier(&table, 2, &ClassifierConfig::default()).unwrap();
        assert!(accuracy(&model, &table) >= 0.99);
    }

    #[test]
    fn zero_weights_predict_uniform() {
        let model = Classifier::untrained(4, FEATURE_DIM);
        let p = model.predict_proba(&[0.3; FEATURE_DIM]).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn retraining_is_deterministic() {
        let table = separable_table(200, false);
        let a = train_classifier(&table, 2, &ClassifierConfig::default()).unwrap();
        let b = train_classifier(&table, 2, &ClassifierConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_permutation_permutes_outputs() {
        let cfg = ClassifierConfig {
            iterations: 50,
            ..Default::default()
        };
        let a = train_classifier(&separable_table(200, false), 2, &cfg).unwrap();
        let b = train_classifier(&separable_table(200, true), 2, &cfg).unwrap();
        let x = [0.45; FEATURE_DIM];
        let pa = a.predict_proba(&x).unwrap();
        let pb = b.predict_proba(&x).unwrap();
        assert!((pa[0] - pb[1]).abs() < 1e-9 && (pa[1] - pb[0]).abs() < 1e-9);
    }

    #[test]
    fn degenerate_tables_fail() {
        let mut one_class = separable_table(200, false);
        one_class.iter_mut().for_each(|r| r.label = 0);
        assert!(matches!(
            train_classifier(&one_class, 2, &ClassifierConfig::default()),
            Err(Error::Training(_))
        ));
        assert!(train_classifier(&separable_table(50, false), 2, &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn feature_dimension_mismatch_is_an_error() {
        let model = Classifier::untrained(2, 3);
        assert!(model.predict_proba(&[0.0; FEATURE_DIM]).is_err());
        let map = crate::terrain::generate_map(&crate::terrain::ScenarioSpec::standard(1)).unwrap();
        assert!(predict_class_proba(&model, &map).is_err());
    }
}
