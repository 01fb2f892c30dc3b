//! Risk inference: collapsing a predictive mixture to one traversability value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::field::{Component, TravField};
use crate::error::{Error, Result};
use crate::grid::Grid;

const TRUNCATION_SIGMAS: f64 = 8.0;
const BISECTION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMetric {
    Mean,
    #[default]
    Cvar,
    Quantile,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    #[default]
    Mixture,
    MostLikelyClass,
}

impl std::str::FromStr for RiskMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(RiskMetric::Mean),
            "cvar" => Ok(RiskMetric::Cvar),
            "quantile" => Ok(RiskMetric::Quantile),
            other => Err(Error::Config(format!("unknown risk metric '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub metric: RiskMetric,
    /// Confidence level; the lower tail holds probability `1 − alpha`.
    pub alpha: f64,
    pub mode: RiskMode,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            metric: RiskMetric::Cvar,
            alpha: 0.9,
            mode: RiskMode::Mixture,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)))
        }
    }
}

#[inline]
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

#[inline]
fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn is_atom(c: &Component) -> bool {
    c.variance <= 0.0
}

/// Mixture CDF `P(X ≤ x)`.
pub fn mixture_cdf(components: &[Component], x: f64) -> f64 {
    components
        .iter()
        .map(|c| {
            if is_atom(c) {
                if x >= c.mean {
                    c.weight
                } else {
                    0.0
                }
            } else {
                c.weight * std_normal_cdf((x - c.mean) / c.variance.sqrt())
            }
        })
        .sum()
}

/// Smallest `x` with `F(x) ≥ p`, by bisection to 1e-8; atoms are hit exactly.
pub fn mixture_quantile(components: &[Component], p: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in components {
        let reach = (TRUNCATION_SIGMAS + 1.0) * c.variance.max(0.0).sqrt();
        lo = lo.min(c.mean - reach);
        hi = hi.max(c.mean + reach);
    }
    lo -= 1e-6;
    hi += 1e-6;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mixture_cdf(components, mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    components
        .iter()
        .filter(|c| is_atom(c) && c.mean > lo && c.mean <= hi)
        .map(|c| c.mean)
        .fold(hi, f64::min)
}

/// Lower-tail CVaR: the mean of the worst `beta` probability mass.
///
/// Gaussian components are truncated at ±8σ and their partial moments below
/// the `beta`-quantile are integrated with 2048-point Gauss-Legendre.
pub fn lower_tail_cvar(components: &[Component], beta: f64) -> f64 {
    let q = mixture_quantile(components, beta);
    let mut mass_below = 0.0;
    let mut moment_below = 0.0;
    for c in components {
        if c.weight == 0.0 {
            continue;
        }
        if is_atom(c) {
            if c.mean < q {
                mass_below += c.weight;
                moment_below += c.weight * c.mean;
            }
            continue;
        }
        let sd = c.variance.sqrt();
        let z_hi = ((q - c.mean) / sd).min(TRUNCATION_SIGMAS);
        if z_hi <= -TRUNCATION_SIGMAS {
            continue;
        }
        let (mut mass, mut moment) = (0.0, 0.0);
        let half = 0.5 * (z_hi + TRUNCATION_SIGMAS);
        let mid = 0.5 * (z_hi - TRUNCATION_SIGMAS);
        for (x, w) in super::quadrature::gauss_legendre() {
            let z = mid + half * x;
            let d = w * std_normal_pdf(z);
            mass += d;
            moment += d * (c.mean + sd * z);
        }
        mass_below += c.weight * half * mass;
        moment_below += c.weight * half * moment;
    }
    (moment_below + q * (beta - mass_below)) / beta
}

/// Risk-evaluated traversability of a mixture.
pub fn risk_of_components(components: &[Component], cfg: &RiskConfig) -> Result<f64> {
    cfg.validate()?;
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if !(total > 0.0) {
        return Err(Error::Data("mixture has zero total weight".into()));
    }
    let mut normalized: Vec<Component> = components
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| Component {
            weight: c.weight / total,
            ..*c
        })
        .collect();
    if cfg.mode == RiskMode::MostLikelyClass {
        let best = (0..normalized.len()).fold(0, |b, k| {
            if normalized[k].weight > normalized[b].weight {
                k
            } else {
                b
            }
        });
        normalized = vec![Component {
            weight: 1.0,
            ..normalized[best]
        }];
    }
    let comps = &normalized;
    let beta = 1.0 - cfg.alpha;
    Ok(match cfg.metric {
        RiskMetric::Mean => comps.iter().map(|c| c.weight * c.mean).sum(),
        RiskMetric::Quantile => mixture_quantile(comps, beta),
        RiskMetric::Cvar => lower_tail_cvar(comps, beta),
    })
}

pub fn risk_value(field: &TravField, cell: usize, cfg: &RiskConfig) -> Result<f64> {
    risk_of_components(&field.components(cell), cfg)
}

/// `risk_value` over every cell, clamped to [0, 1].
pub fn risk_raster(field: &TravField, cfg: &RiskConfig) -> Result<Grid<f64>> {
    cfg.validate()?;
    let values: Vec<f64> = (0..field.n_cells())
        .into_par_iter()
        .map(|cell| risk_value(field, cell, cfg).map(|v| v.clamp(0.0, 1.0)))
        .collect::<Result<_>>()?;
    let g = field.geometry();
    Grid::from_vec(g.width, g.height, values)
}
