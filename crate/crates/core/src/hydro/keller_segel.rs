use serde::{Deserialize, Serialize};

use super::HydroGrid;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Form of the chemotactic drift in `∂_t μ = ∂_x(μ ∂_x μ) - η ∂_x(μ D[ψ])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    /// `D[ψ] = ∂_x ψ`
    #[default]
    Gradient,
    /// `D[ψ] = ψ`
    Potential,
}

/// Density-only model `∂_t μ = ∂_x(μ ∂_x μ) - η ∂_x(μ D[ψ])` with the
/// potential from `(κ - D Δ) ψ = μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KellerSegel {
    pub eta: f64,
    #[serde(rename = "kappa_per_time")]
    pub kappa: f64,
    #[serde(rename = "diffusivity_length2_per_time", default = "one")]
    pub diffusivity: f64,
    #[serde(default)]
    pub drift: DriftForm,
}

fn one() -> f64 {
    1.0
}

impl KellerSegel {
    pub fn from_model(model: &ModelSpec, drift: DriftForm) -> Result<Self> {
        let c = model
            .chemistry()
            .ok_or_else(|| Error::Unsupported("Keller-Segel needs a chemotaxis model".into()))?;
        let ks = Self { eta: c.eta, kappa: c.kappa, diffusivity: c.diffusivity, drift };
        ks.validate()?;
        Ok(ks)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() {
            return Err(Error::invalid("eta", "must be finite"));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Elliptic(format!(
                "the periodic potential equation needs kappa > 0, got {}",
                self.kappa
            )));
        }
        if !(self.diffusivity.is_finite() && self.diffusivity >= 0.0) {
            return Err(Error::invalid("diffusivity_length2_per_time", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Solves the periodic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod n).
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch { left: rhs.len(), right: n });
    }
    if n < 3 {
        return Err(Error::Elliptic("cyclic system needs at least 3 unknowns".into()));
    }
    // Sherman-Morrison: A = T + w zᵀ with w = (γ, 0.., upper[n-1]), z = (1, 0.., lower[0]/γ)
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= lower[0] * upper[n - 1] / gamma;
    let thomas = |d: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        c[0] = upper[0] / b[0];
        y[0] = d[0] / b[0];
        for i in 1..n {
            let m = b[i] - lower[i] * c[i - 1];
            c[i] = upper[i] / m;
            y[i] = (d[i] - lower[i] * y[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    };
    let y = thomas(rhs);
    let mut w = vec![0.0; n];
    w[0] = gamma;
    w[n - 1] = upper[n - 1];
    let zv = thomas(&w);
    let factor = (y[0] + lower[0] / gamma * y[n - 1]) / (1.0 + zv[0] + lower[0] / gamma * zv[n - 1]);
    let x: Vec<f64> = y.iter().zip(&zv).map(|(a, b)| a - factor * b).collect();

    let scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let residual = (0..n)
        .map(|i| {
            let l = x[(i + n - 1) % n];
            let r = x[(i + 1) % n];
            (lower[i] * l + diag[i] * x[i] + upper[i] * r - rhs[i]).abs()
        })
        .fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Elliptic(format!("cyclic solve residual {residual:.3e}")));
    }
    Ok(x)
}

/// `ψ` solving `κ ψ - D ψ'' = μ` on the periodic grid.
pub fn solve_potential(grid: &HydroGrid, mu: &[f64], ks: &KellerSegel) -> Result<Vec<f64>> {
    ks.validate()?;
    let n = grid.nx;
    let h2 = grid.dx() * grid.dx();
    let off = -ks.diffusivity / h2;
    let diag = ks.kappa + 2.0 * ks.diffusivity / h2;
    solve_cyclic_tridiagonal(&vec![off; n], &vec![diag; n], &vec![off; n], mu)
}

/// One explicit step of the density equation; returns the new density and
/// the potential solved from it.
pub fn step_keller_segel(grid: &HydroGrid, mu: &[f64], ks: &KellerSegel, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    if mu.len() != grid.nx {
        return Err(Error::DimensionMismatch { left: mu.len(), right: grid.nx });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt_time", "must be finite and > 0"));
    }
    let n = grid.nx;
    let dx = grid.dx();
    let peak = mu.iter().fold(0.0f64, |a, &b| a.max(b));
    let parabolic = peak * dt / (dx * dx);
    if parabolic > 0.25 {
        return Err(Error::Cfl { section: "keller_segel", number: parabolic, limit: 0.25 });
    }
    let psi = solve_potential(grid, mu, ks)?;
    // face velocity of the drift, upwinded
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let r = (i + 1) % n;
            match ks.drift {
                DriftForm::Gradient => ks.eta * (psi[r] - psi[i]) / dx,
                DriftForm::Potential => ks.eta * 0.5 * (psi[r] + psi[i]),
            }
        })
        .collect();
    let advective = w.iter().fold(0.0f64, |a, b| a.max(b.abs())) * dt / dx;
    if advective > 0.5 {
        return Err(Error::Cfl { section: "keller_segel_drift", number: advective, limit: 0.5 });
    }
    let flux: Vec<f64> = (0..n)
        .map(|i| {
            let r = (i + 1) % n;
            let diffusive = -0.5 * (mu[i] + mu[r]) * (mu[r] - mu[i]) / dx;
            let upwind = if w[i] >= 0.0 { mu[i] } else { mu[r] };
            diffusive + w[i] * upwind
        })
        .collect();
    let mut next: Vec<f64> = (0..n).map(|i| mu[i] - dt * (flux[i] - flux[(i + n - 1) % n]) / dx).collect();
    for m in next.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    let before: f64 = mu.iter().sum::<f64>() * dx;
    let drift = (next.iter().sum::<f64>() * dx - before).abs();
    if drift > super::MASS_DRIFT_LIMIT {
        return Err(Error::MassDrift { section: "keller_segel", drift, limit: super::MASS_DRIFT_LIMIT });
    }
    let psi = solve_potential(grid, &next, ks)?;
    Ok((next, psi))
}
