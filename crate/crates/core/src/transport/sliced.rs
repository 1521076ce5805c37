use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{quantile::wp_1d, DiscreteMeasure, Distance, Estimator};
use crate::error::{Error, Result};

pub const DEFAULT_DIRECTIONS: usize = 256;

/// Sliced `W2`: root mean of squared 1D distances between projections on
/// uniformly random unit directions. Never exceeds the exact `W2`.
///
/// The standard error is propagated from the per-direction spread.
pub fn sliced_w2(a: &DiscreteMeasure, b: &DiscreteMeasure, directions: usize, seed: u64) -> Result<Distance> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { left: a.dim, right: b.dim });
    }
    if directions < DEFAULT_DIRECTIONS {
        return Err(Error::invalid("directions", format!("must be >= {DEFAULT_DIRECTIONS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas: Vec<Vec<f64>> = (0..directions)
        .map(|_| loop {
            let g: Vec<f64> = (0..a.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break g.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();
    let values: Vec<f64> = thetas
        .par_iter()
        .map(|th| wp_1d(&a.project(th), &a.weights, &b.project(th), &b.weights, 2))
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    let value = mean.max(0.0).sqrt();
    let se_mean = (var / k).sqrt();
    let std_error = if value > 0.0 { se_mean / (2.0 * value) } else { se_mean.sqrt() };
    Ok(Distance { value, std_error: Some(std_error), estimator: Estimator::Sliced })
}
