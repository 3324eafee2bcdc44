//! Expectations over covariate laws.
//!
//! Normal components are integrated with Gauss-Hermite rules, finite laws by
//! exact weighted sums, and independent products by tensor grids up to
//! [`MAX_TENSOR_DIM`] covariates. Larger products fall back to seeded Monte
//! Carlo.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const DEFAULT_NODES: usize = 64;
pub const MAX_TENSOR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Gauss-Hermite nodes per normal component.
    pub nodes: usize,
    /// Draws used when the law is too high-dimensional for a tensor grid.
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            nodes: DEFAULT_NODES,
            mc_draws: 200_000,
            seed: 0x5eed,
        }
    }
}

impl QuadratureSettings {
    pub fn with_nodes(nodes: usize) -> Self {
        QuadratureSettings {
            nodes,
            ..Default::default()
        }
    }

    /// Same settings with the node count doubled.
    pub fn refined(&self) -> Self {
        QuadratureSettings {
            nodes: self.nodes * 2,
            ..*self
        }
    }
}

/// Gauss-Hermite rule for the physicists' weight `exp(-z^2)`.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_hermite(n: usize) -> HermiteRule {
    // Newton iteration on orthonormal Hermite polynomials with the usual
    // asymptotic starting guesses for the largest roots.
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    HermiteRule { nodes: x, weights: w }
}

/// Cached Gauss-Hermite rule with `n` nodes.
pub fn hermite_rule(n: usize) -> Arc<HermiteRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("hermite cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_hermite(n)))
        .clone()
}

/// Nodes and probability weights for one univariate component.
pub fn univariate_nodes(
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
) -> Vec<(f64, f64)> {
    match dist {
        CovariateDistribution::Normal { mean, sd } => {
            let rule = hermite_rule(settings.nodes);
            let norm = std::f64::consts::PI.sqrt();
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(z, w)| (mean + std::f64::consts::SQRT_2 * sd * z, w / norm))
                .collect()
        }
        CovariateDistribution::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
        CovariateDistribution::Discrete { values, probs } => {
            values.iter().copied().zip(probs.iter().copied()).collect()
        }
        CovariateDistribution::Product { .. } => {
            unreachable!("products are expanded component-wise")
        }
    }
}

/// An expectation together with its Monte Carlo standard error (zero for exact rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub mc_se: f64,
}

fn non_finite(x: &[f64], v: f64) -> Error {
    Error::NumericDomain(format!("integrand is {v} at node x = {x:?}"))
}

/// `E[f(X)]` under `dist`.
pub fn expectation<F>(dist: &CovariateDistribution, f: F, settings: &QuadratureSettings) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    expectation_detail(dist, f, settings).map(|e| e.value)
}

/// Like [`expectation`], also reporting the Monte Carlo error when sampling is used.
pub fn expectation_detail<F>(
    dist: &CovariateDistribution,
    f: F,
    settings: &QuadratureSettings,
) -> Result<Expectation>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = dist.dim();
    if dim > MAX_TENSOR_DIM {
        return monte_carlo(dist, f, settings);
    }
    let grids: Vec<Vec<(f64, f64)>> = dist
        .components()
        .iter()
        .map(|c| univariate_nodes(c, settings))
        .collect();
    let mut index = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    'outer: loop {
        let mut weight = 1.0;
        for (k, grid) in grids.iter().enumerate() {
            let (node, w) = grid[index[k]];
            x[k] = node;
            weight *= w;
        }
        let v = f(&x);
        if !v.is_finite() {
            return Err(non_finite(&x, v));
        }
        total += weight * v;
        for k in (0..dim).rev() {
            index[k] += 1;
            if index[k] < grids[k].len() {
                continue 'outer;
            }
            index[k] = 0;
        }
        break;
    }
    Ok(Expectation {
        value: total,
        mc_se: 0.0,
    })
}

fn monte_carlo<F>(dist: &CovariateDistribution, f: F, settings: &QuadratureSettings) -> Result<Expectation>
where
    F: Fn(&[f64]) -> f64,
{
    let draws = settings.mc_draws.max(2);
    let mut rng = stream_rng(settings.seed, 0);
    let mut x = vec![0.0; dist.dim()];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..draws {
        dist.sample_into(&mut rng, &mut x);
        let v = f(&x);
        if !v.is_finite() {
            return Err(non_finite(&x, v));
        }
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (draws - 1) as f64;
    Ok(Expectation {
        value: mean,
        mc_se: (var / draws as f64).sqrt(),
    })
}
