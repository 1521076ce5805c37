use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest `(N, distance)` pairs accepted by [`fit_rate`].
pub const MIN_RATE_POINTS: usize = 4;

/// Ordinary least squares of `ln y` on `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub rms_residual: f64,
    /// Standard error of the slope; NaN with only two points.
    pub slope_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitResult {
    pub alpha_hat: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub residual: f64,
    pub slope_std_error: f64,
    /// The fitted `(N, distance)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

impl RateFitResult {
    /// How many standard errors the fitted slope lies below zero.
    pub fn slope_sigmas(&self) -> f64 {
        self.alpha_hat / self.slope_std_error
    }
}

pub fn log_log_regression(points: &[(f64, f64)]) -> Result<Regression> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least two"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && x.is_finite() && y > 0.0 && y.is_finite())) {
        return Err(Error::invalid("points", "coordinates must be positive and finite"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("points", "need at least two distinct abscissae"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_std_error = if points.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(Regression { slope, intercept, rms_residual: (ssr / n).sqrt(), slope_std_error })
}

/// Fits `distance ≈ Ĉ · N^{−α̂}`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFitResult> {
    if pairs.len() < MIN_RATE_POINTS {
        return Err(Error::invalid("pairs", format!("need at least {MIN_RATE_POINTS} values of N")));
    }
    if let Some(&(n, d)) = pairs.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::invalid("distance", format!("must be positive, got {d} at N = {n}")));
    }
    let r = log_log_regression(pairs)?;
    Ok(RateFitResult {
        alpha_hat: -r.slope,
        c_hat: r.intercept.exp(),
        residual: r.rms_residual,
        slope_std_error: r.slope_std_error,
        pairs: pairs.to_vec(),
    })
}

/// Removes an independent noise contribution measured separately:
/// `sqrt(max(d² − floor², 0))`.
pub fn subtract_noise_floor(distance: f64, floor: f64) -> f64 {
    (distance * distance - floor * floor).max(0.0).sqrt()
}
