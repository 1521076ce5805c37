//! Wasserstein distances between discrete measures, marginal extraction
//! from replica ensembles, and convergence-rate fitting.

mod marginal;
mod quantile;
mod rate;
mod simplex;
mod sliced;

pub use marginal::{
    chaos_error, extract_marginal, extract_marginal_indexed, product_measure, vlasov_reference_measure,
    ChaosOptions, Quantization,
};
pub use quantile::{w1_1d, wp_1d};
pub use rate::{fit_rate, log_log_regression, subtract_noise_floor, RateFitResult, Regression, MIN_RATE_POINTS};
pub use simplex::{transport, TransportPlan};
pub use sliced::{sliced_w2, DEFAULT_DIRECTIONS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest support the exact solver accepts on either side.
pub const EXACT_LIMIT: usize = 4000;
/// Coordinates closer than this are the same atom.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Weighted point cloud in `ℝ^dim`; points are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self { dim, points, weights };
        m.validate()?;
        Ok(m)
    }

    /// Equal weights on every point.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        let n = points.len() / dim;
        Self::new(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        let dim = point.len();
        Self::new(dim, point, vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if self.weights.is_empty() {
            return Err(Error::invalid("measure", "needs at least one atom"));
        }
        if self.points.len() != self.weights.len() * self.dim {
            return Err(Error::DimensionMismatch { left: self.points.len(), right: self.weights.len() * self.dim });
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("points", "must be finite"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "must be finite and >= 0"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Multiplies every support point by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, points: self.points.iter().map(|p| p * s).collect(), weights: self.weights.clone() }
    }

    /// Projection `⟨θ, x⟩` of every atom.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.points.chunks(self.dim).map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum()).collect()
    }

    /// Drops zero-weight atoms and merges atoms whose coordinates agree to `tol`.
    pub fn merged(&self, tol: f64) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        idx.sort_by(|&a, &b| {
            self.point(a).iter().zip(self.point(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut points: Vec<f64> = Vec::with_capacity(idx.len() * self.dim);
        let mut weights: Vec<f64> = Vec::with_capacity(idx.len());
        for &i in &idx {
            let p = self.point(i);
            let same = weights.last().is_some() && {
                let last = &points[points.len() - self.dim..];
                last.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol)
            };
            if same {
                *weights.last_mut().unwrap() += self.weights[i];
            } else {
                points.extend_from_slice(p);
                weights.push(self.weights[i]);
            }
        }
        Self { dim: self.dim, points, weights }
    }

    /// Copy without zero-weight atoms.
    pub(crate) fn support(&self) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        Self {
            dim: self.dim,
            points: keep.iter().flat_map(|&i| self.point(i).iter().copied()).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Quantile,
    NetworkSimplex,
    Sliced,
}

/// A distance value; estimates carry a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub value: f64,
    pub std_error: Option<f64>,
    pub estimator: Estimator,
}

impl Distance {
    fn exact(value: f64, estimator: Estimator) -> Self {
        Self { value, std_error: None, estimator }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case", deny_unknown_fields)]
pub enum Solver {
    /// Quantile coupling in one dimension, network simplex otherwise;
    /// fails beyond the exact size limit.
    #[default]
    Exact,
    /// Like `Exact`, falling back to slicing for large supports.
    Auto { directions: usize, seed: u64 },
    /// Always sliced, with the given number of random directions.
    Sliced { directions: usize, seed: u64 },
    /// Network simplex even in one dimension.
    NetworkSimplex,
}

/// Order-`p` Wasserstein distance for `p ∈ {1, 2}`.
pub fn wasserstein(a: &DiscreteMeasure, b: &DiscreteMeasure, p: u32, solver: Solver) -> Result<Distance> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { left: a.dim, right: b.dim });
    }
    if p != 1 && p != 2 {
        return Err(Error::invalid("p", "only orders 1 and 2 are supported"));
    }
    a.validate()?;
    b.validate()?;
    let exact = |a: &DiscreteMeasure, b: &DiscreteMeasure, force_lp: bool| -> Result<Distance> {
        if a.dim == 1 && !force_lp {
            let v = if p == 1 {
                w1_1d(&a.points, &a.weights, &b.points, &b.weights)
            } else {
                wp_1d(&a.points, &a.weights, &b.points, &b.weights, 2).sqrt()
            };
            return Ok(Distance::exact(v, Estimator::Quantile));
        }
        let (sa, sb) = (a.support(), b.support());
        let biggest = sa.len().max(sb.len());
        if biggest > EXACT_LIMIT {
            return Err(Error::SizeExceeded { limit: EXACT_LIMIT, got: biggest });
        }
        let plan = transport(&sa.weights, &sb.weights, |i, j| ground_cost(sa.point(i), sb.point(j), p))?;
        let v = if p == 1 { plan.cost } else { plan.cost.max(0.0).sqrt() };
        Ok(Distance::exact(v, Estimator::NetworkSimplex))
    };
    match solver {
        Solver::Exact => exact(a, b, false),
        Solver::NetworkSimplex => exact(a, b, true),
        Solver::Auto { directions, seed } => {
            if a.dim == 1 || a.support().len().max(b.support().len()) <= EXACT_LIMIT {
                exact(a, b, false)
            } else {
                sliced_for(a, b, p, directions, seed)
            }
        }
        Solver::Sliced { directions, seed } => sliced_for(a, b, p, directions, seed),
    }
}

fn sliced_for(a: &DiscreteMeasure, b: &DiscreteMeasure, p: u32, directions: usize, seed: u64) -> Result<Distance> {
    if p != 2 {
        return Err(Error::Unsupported("the sliced estimator is implemented for W2 only".into()));
    }
    sliced_w2(a, b, directions, seed)
}

pub(crate) fn ground_cost(x: &[f64], y: &[f64], p: u32) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2 {
        d2
    } else {
        d2.sqrt()
    }
}

/// Exact `W2` (quantile coupling in 1D, network simplex otherwise).
pub fn w2(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(wasserstein(a, b, 2, Solver::Exact)?.value)
}

/// Exact `W1` (CDF integral in 1D, network simplex otherwise).
pub fn w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(wasserstein(a, b, 1, Solver::Exact)?.value)
}
