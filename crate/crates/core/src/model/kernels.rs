//! Builtin kernel catalogue: pair potentials, alignment weights, rank weights,
//! the chemical mollifier and external forces.
//!
//! Every radial kernel is evaluated from the squared separation so the force
//! loops never take a square root they do not need.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of a pair sum. `Minus` is the Hamiltonian / aligning form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Default for Sign {
    fn default() -> Self {
        Sign::Minus
    }
}

impl TryFrom<i64> for Sign {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i64 {
    fn from(s: Sign) -> i64 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Radial pair potential `V(z) = v(|z|)`. The gradient is returned as a scalar
/// factor `g` with `∇V(z) = g(|z|²) z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairPotential {
    /// `V = k |z|² / 2`
    Harmonic {
        #[serde(rename = "stiffness_per_time2")]
        stiffness: f64,
    },
    /// Bounded Morse-like well `V = D (1 - exp(-|z|/a))²`.
    MorseBounded {
        depth: f64,
        #[serde(rename = "range_length")]
        range: f64,
    },
    /// `V = A exp(-|z|² / (2 w²))`
    GaussianBump {
        amplitude: f64,
        #[serde(rename = "width_length")]
        width: f64,
    },
    /// Unit-mass Gaussian of standard deviation `w`; approximates a Dirac mass.
    MollifiedDirac {
        #[serde(rename = "width_length")]
        width: f64,
    },
}

impl PairPotential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PairPotential::Harmonic { stiffness } => {
                finite_nonneg("stiffness_per_time2", stiffness)
            }
            PairPotential::MorseBounded { depth, range } => {
                finite_nonneg("depth", depth)?;
                positive("range_length", range)
            }
            PairPotential::GaussianBump { amplitude, width } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid("amplitude", "must be finite"));
                }
                positive("width_length", width)
            }
            PairPotential::MollifiedDirac { width } => positive("width_length", width),
        }
    }

    /// Potential value at squared separation `r2` in dimension `dim`.
    pub fn value(&self, r2: f64, dim: usize) -> f64 {
        match *self {
            PairPotential::Harmonic { stiffness } => 0.5 * stiffness * r2,
            PairPotential::MorseBounded { depth, range } => {
                let s = 1.0 - (-r2.sqrt() / range).exp();
                depth * s * s
            }
            PairPotential::GaussianBump { amplitude, width } => {
                amplitude * (-0.5 * r2 / (width * width)).exp()
            }
            PairPotential::MollifiedDirac { width } => {
                gaussian_norm(width, dim) * (-0.5 * r2 / (width * width)).exp()
            }
        }
    }

    /// Factor `g` such that `∇V(z) = g(|z|²) z`.
    pub fn grad_factor(&self, r2: f64, dim: usize) -> f64 {
        match *self {
            PairPotential::Harmonic { stiffness } => stiffness,
            PairPotential::MorseBounded { depth, range } => {
                let r = r2.sqrt();
                if r < 1e-8 * range {
                    // limit of V'(r)/r at the origin
                    return 2.0 * depth / (range * range);
                }
                let e = (-r / range).exp();
                2.0 * depth * (1.0 - e) * e / (range * r)
            }
            PairPotential::GaussianBump { amplitude, width } => {
                let w2 = width * width;
                -amplitude / w2 * (-0.5 * r2 / w2).exp()
            }
            PairPotential::MollifiedDirac { width } => {
                let w2 = width * width;
                -gaussian_norm(width, dim) / w2 * (-0.5 * r2 / w2).exp()
            }
        }
    }

    /// Lipschitz constant of `∇V`.
    pub fn gradient_lipschitz(&self, dim: usize) -> f64 {
        match *self {
            PairPotential::Harmonic { stiffness } => stiffness.abs(),
            PairPotential::MorseBounded { depth, range } => 2.0 * depth / (range * range),
            PairPotential::GaussianBump { amplitude, width } => amplitude.abs() / (width * width),
            PairPotential::MollifiedDirac { width } => gaussian_norm(width, dim) / (width * width),
        }
    }

    /// True when `∇V` is linear, so pair sums collapse onto the centre of mass.
    pub fn is_linear(&self) -> bool {
        matches!(self, PairPotential::Harmonic { .. })
    }
}

fn gaussian_norm(width: f64, dim: usize) -> f64 {
    (2.0 * PI * width * width).powf(-(dim as f64) / 2.0)
}

/// Cucker-Smale communication weight `ψ(r) = (1 + r²/R²)^(-β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuckerSmale {
    #[serde(rename = "lambda_per_time")]
    pub coupling: f64,
    #[serde(rename = "radius_length")]
    pub radius: f64,
    #[serde(rename = "beta")]
    pub decay: f64,
    #[serde(default)]
    pub sign: Sign,
}

impl CuckerSmale {
    pub fn validate(&self) -> Result<()> {
        finite_nonneg("lambda_per_time", self.coupling)?;
        positive("radius_length", self.radius)?;
        finite_nonneg("beta", self.decay)
    }

    #[inline]
    pub fn weight(&self, r2: f64) -> f64 {
        let s = 1.0 + r2 / (self.radius * self.radius);
        if self.decay == 1.0 {
            1.0 / s
        } else {
            s.powf(-self.decay)
        }
    }
}

/// Non-increasing weight `K: [0, 1] -> R+` of the neighbour rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum RankWeight {
    /// `K(m) = k0 max(0, 1 - m / cutoff)`
    ClampedLinear { k0: f64, cutoff: f64 },
    /// `K(m) = k0 / (1 + exp((m - center) / width))`
    SmoothStep { k0: f64, center: f64, width: f64 },
}

impl RankWeight {
    #[inline]
    pub fn eval(&self, m: f64) -> f64 {
        match *self {
            RankWeight::ClampedLinear { k0, cutoff } => k0 * (1.0 - m / cutoff).max(0.0),
            RankWeight::SmoothStep { k0, center, width } => {
                k0 / (1.0 + ((m - center) / width).exp())
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            RankWeight::ClampedLinear { k0, cutoff } => k0 / cutoff,
            RankWeight::SmoothStep { k0, width, .. } => k0 / (4.0 * width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RankWeight::ClampedLinear { k0, cutoff } => {
                finite_nonneg("k0", k0)?;
                positive("cutoff", cutoff)?;
            }
            RankWeight::SmoothStep { k0, center, width } => {
                finite_nonneg("k0", k0)?;
                if !center.is_finite() {
                    return Err(Error::invalid("center", "must be finite"));
                }
                positive("width", width)?;
            }
        }
        let mut prev = self.eval(0.0);
        if !prev.is_finite() {
            return Err(Error::invalid("rank_weight", "K(0) is not finite"));
        }
        for k in 1..=256 {
            let next = self.eval(k as f64 / 256.0);
            if next > prev + 1e-14 * prev.abs().max(1.0) {
                return Err(Error::invalid("rank_weight", "K must be non-increasing on [0, 1]"));
            }
            prev = next;
        }
        Ok(())
    }
}

/// Raised-cosine bump of radius `r`, normalised to unit mass in dimension `dim`.
/// This is the C¹ mollified indicator used as chemical source profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaisedCosine {
    pub radius: f64,
}

impl RaisedCosine {
    pub fn new(radius: f64) -> Result<Self> {
        positive("chi_radius_length", radius)?;
        Ok(Self { radius })
    }

    /// Mass of the unnormalised profile `1 + cos(π|z|/r)` on its support.
    pub fn raw_mass(&self, dim: usize) -> f64 {
        let r = self.radius;
        match dim {
            1 => 2.0 * r,
            2 => r * r * (PI - 4.0 / PI),
            3 => r * r * r * (4.0 * PI / 3.0 - 8.0 / PI),
            _ => f64::NAN,
        }
    }

    #[inline]
    pub fn eval(&self, r2: f64, dim: usize) -> f64 {
        let r = self.radius;
        if r2 >= r * r {
            return 0.0;
        }
        (1.0 + (PI * r2.sqrt() / r).cos()) / self.raw_mass(dim)
    }

    /// Lipschitz constant of the normalised profile.
    pub fn lipschitz(&self, dim: usize) -> f64 {
        PI / self.radius / self.raw_mass(dim)
    }
}

/// Bounded-confidence cutoff `φ(r) = (1 + cos(π r / r_c)) / 2` for `r < r_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrauseKernel {
    #[serde(rename = "confidence_radius_length")]
    pub confidence_radius: f64,
}

impl KrauseKernel {
    #[inline]
    pub fn cutoff(&self, r2: f64) -> f64 {
        let rc = self.confidence_radius;
        if r2 >= rc * rc {
            0.0
        } else {
            0.5 * (1.0 + (PI * r2.sqrt() / rc).cos())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalForce {
    /// Confinement `F(x) = -k x`.
    Harmonic {
        #[serde(rename = "stiffness_per_time2")]
        stiffness: f64,
    },
    Constant { force: Vec<f64> },
}

impl ExternalForce {
    pub fn add_to(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ExternalForce::Harmonic { stiffness } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o -= stiffness * xi;
                }
            }
            ExternalForce::Constant { force } => {
                for (o, f) in out.iter_mut().zip(force) {
                    *o += f;
                }
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            ExternalForce::Harmonic { stiffness } => stiffness.abs(),
            ExternalForce::Constant { .. } => 0.0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ExternalForce::Harmonic { stiffness } => finite_nonneg("stiffness_per_time2", *stiffness),
            ExternalForce::Constant { force } => {
                if force.len() != dim {
                    return Err(Error::DimensionMismatch { left: force.len(), right: dim });
                }
                if force.iter().any(|f| !f.is_finite()) {
                    return Err(Error::invalid("force", "must be finite"));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

pub(crate) fn finite_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint_mass(chi: &RaisedCosine, dim: usize) -> f64 {
        // radial quadrature of the normalised profile
        let n = 20_000;
        let h = chi.radius / n as f64;
        let shell = |r: f64| match dim {
            1 => 2.0,
            2 => 2.0 * PI * r,
            _ => 4.0 * PI * r * r,
        };
        (0..n)
            .map(|k| {
                let r = (k as f64 + 0.5) * h;
                chi.eval(r * r, dim) * shell(r) * h
            })
            .sum()
    }

    #[test]
    fn raised_cosine_has_unit_mass() {
        let chi = RaisedCosine::new(0.7).unwrap();
        for dim in 1..=3 {
            assert!((midpoint_mass(&chi, dim) - 1.0).abs() < 1e-7, "dim {dim}");
        }
    }

    #[test]
    fn morse_gradient_matches_finite_difference() {
        let v = PairPotential::MorseBounded { depth: 1.3, range: 0.8 };
        for &r in &[0.05, 0.4, 1.0, 3.0] {
            let h = 1e-6;
            let dv = (v.value((r + h) * (r + h), 1) - v.value((r - h) * (r - h), 1)) / (2.0 * h);
            assert!((v.grad_factor(r * r, 1) * r - dv).abs() < 1e-7);
        }
    }

    #[test]
    fn rank_weight_rejects_increasing() {
        let k = RankWeight::SmoothStep { k0: 1.0, center: 0.5, width: -0.1 };
        assert!(k.validate().is_err());
        assert!(RankWeight::ClampedLinear { k0: 2.0, cutoff: 0.5 }.validate().is_ok());
    }

    #[test]
    fn sign_parses_only_unit_values() {
        assert_eq!(Sign::try_from(-1).unwrap(), Sign::Minus);
        assert!(Sign::try_from(0).is_err());
    }
}
