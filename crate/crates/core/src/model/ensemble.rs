use serde::{Deserialize, Serialize};

use super::field::ChemicalField;
use crate::error::{Error, Result};

/// Spatial domain for particle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Free,
    Periodic { lo: Vec<f64>, hi: Vec<f64> },
}

impl Default for Domain {
    fn default() -> Self {
        Domain::Free
    }
}

impl Domain {
    pub fn periodic_cube(dim: usize, lo: f64, hi: f64) -> Self {
        Domain::Periodic { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Domain::Periodic { lo, hi } = self {
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::DimensionMismatch { left: lo.len().max(hi.len()), right: dim });
            }
            for (a, b) in lo.iter().zip(hi) {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return Err(Error::invalid("box", format!("empty or non-finite box [{a}, {b}]")));
                }
            }
        }
        Ok(())
    }

    /// Minimum-image displacement `a - b` along every coordinate.
    #[inline]
    pub fn delta(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = a[k] - b[k];
        }
        if let Domain::Periodic { lo, hi } = self {
            for k in 0..out.len() {
                let len = hi[k] - lo[k];
                out[k] -= len * (out[k] / len).round();
            }
        }
    }

    /// Squared minimum-image distance.
    #[inline]
    pub fn dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        match self {
            Domain::Free => {
                for k in 0..a.len() {
                    let d = a[k] - b[k];
                    s += d * d;
                }
            }
            Domain::Periodic { lo, hi } => {
                for k in 0..a.len() {
                    let len = hi[k] - lo[k];
                    let mut d = a[k] - b[k];
                    d -= len * (d / len).round();
                    s += d * d;
                }
            }
        }
        s
    }

    pub fn wrap(&self, x: &mut [f64], dim: usize) {
        if let Domain::Periodic { lo, hi } = self {
            for p in x.chunks_mut(dim) {
                for k in 0..dim {
                    let len = hi[k] - lo[k];
                    let y = (p[k] - lo[k]).rem_euclid(len);
                    // rem_euclid can round up to len itself
                    p[k] = lo[k] + if y >= len { 0.0 } else { y };
                }
            }
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Periodic { .. })
    }
}

/// Positions, velocities and masses of `N` agents in dimension `d`, with the
/// chemical field they source when the model has one.
///
/// Coordinates are stored particle-major: particle `i` occupies
/// `[i*d, (i+1)*d)` of `positions` and `velocities`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub masses: Vec<f64>,
    pub domain: Domain,
    pub chem: Option<ChemicalField>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let ens = Self { dim, positions, velocities, masses, domain: Domain::Free, chem: None };
        ens.validate()?;
        Ok(ens)
    }

    /// Unit-mass ensemble.
    pub fn unit_mass(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { positions.len() / dim };
        Self::new(dim, positions, velocities, vec![1.0; n])
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        domain.validate(self.dim)?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_chem(mut self, field: ChemicalField) -> Result<Self> {
        if field.grid.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: field.grid.dim(), right: self.dim });
        }
        self.chem = Some(field);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        let n = self.masses.len();
        if n == 0 {
            return Err(Error::invalid("n", "ensemble must hold at least one particle"));
        }
        if self.positions.len() != n * self.dim {
            return Err(Error::DimensionMismatch { left: self.positions.len(), right: n * self.dim });
        }
        if self.velocities.len() != n * self.dim {
            return Err(Error::DimensionMismatch { left: self.velocities.len(), right: n * self.dim });
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid("masses", "must be finite and > 0"));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite { what: "ensemble", step: 0 });
        }
        self.domain.validate(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.velocities).all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    /// `max_{i,j} |v_i - v_j|`
    pub fn velocity_diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = self
                    .velocity(i)
                    .iter()
                    .zip(self.velocity(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        let total: f64 = self.masses.iter().sum();
        for i in 0..self.len() {
            for k in 0..self.dim {
                c[k] += self.masses[i] * self.position(i)[k];
            }
        }
        c.iter_mut().for_each(|v| *v /= total);
        c
    }
}
