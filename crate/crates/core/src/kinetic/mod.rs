//! Grid solver for the one-dimensional Vlasov equation
//! `∂_t ρ + v ∂_x ρ + ∂_v (F[ρ] ρ) = 0` on a periodic-in-x phase box.
//!
//! Cell averages live on an `n_x × n_v` grid. Each step is Strang split:
//! half an x-shift, a full v-remap with the force frozen at the midpoint
//! density, half an x-shift. Both sub-steps are conservative semi-Lagrangian
//! remaps of the cell primitive, so mass only leaves through the truncated
//! velocity boundary.

mod advect;
mod force;

pub use force::{vlasov_force_field, ForceField};
pub(crate) use force::{moment_force, Cells};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{deposit_sources, Boundary, ChemicalField, FieldGrid, ModelSpec};
use crate::particles::{advance_chemical, chemical_cfl, InitialLaw, CHEM_CFL_LIMIT};

/// Largest mass change tolerated in one step.
pub const MASS_DRIFT_LIMIT: f64 = 1e-8;
/// Relative density below which a velocity is left undefined.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// How interaction distances are measured on the x-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRange {
    /// Minimum-image distance on the periodic box.
    #[default]
    MinimumImage,
    /// Plain difference `x - y`, for densities supported well inside the box.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    #[serde(rename = "x_min_length")]
    pub x_min: f64,
    #[serde(rename = "x_max_length")]
    pub x_max: f64,
    pub nx: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub nv: usize,
    #[serde(default)]
    pub kernel_range: KernelRange,
}

impl PhaseGrid {
    pub fn new(x: (f64, f64), nx: usize, v: (f64, f64), nv: usize) -> Result<Self> {
        let g = Self { x_min: x.0, x_max: x.1, nx, v_min: v.0, v_max: v.1, nv, kernel_range: KernelRange::default() };
        g.validate()?;
        Ok(g)
    }

    pub fn with_range(mut self, range: KernelRange) -> Self {
        self.kernel_range = range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::invalid("x_range", "needs finite x_min < x_max"));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_max > self.v_min) {
            return Err(Error::invalid("v_range", "needs finite v_min < v_max"));
        }
        if self.nx < 4 || self.nv < 4 {
            return Err(Error::invalid("grid", "needs at least 4 cells per axis"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.nv as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_min + (j as f64 + 0.5) * self.dv()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn vs(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dv()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn cells(&self) -> force::Cells {
        force::Cells { nx: self.nx, x_min: self.x_min, dx: self.dx(), range: self.kernel_range }
    }

    /// Matching one-dimensional field grid for the chemical coupling.
    pub fn field_grid(&self) -> Result<FieldGrid> {
        FieldGrid::line(self.x_min, self.x_max, self.nx, Boundary::Periodic)
    }
}

/// Phase-space density, stored x-major: `values[i * nv + j] = ρ(x_i, v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
}

impl PhaseDensity {
    /// Samples `f` at cell centres, clips negatives and normalises to unit mass.
    pub fn from_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.validate()?;
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.nv {
                values.push(f(grid.x(i), grid.v(j)).max(0.0));
            }
        }
        let mut rho = Self { grid, values };
        rho.normalize()?;
        rho.check_truncation();
        Ok(rho)
    }

    pub fn from_law(grid: PhaseGrid, law: &InitialLaw) -> Result<Self> {
        law.validate()?;
        Self::from_fn(grid, |x, v| law.density(&[x], &[v]))
    }

    pub fn from_values(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { left: values.len(), right: grid.len() });
        }
        let rho = Self { grid, values };
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("density", "values must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("density", "needs positive finite mass"));
        }
        self.values.iter_mut().for_each(|r| *r /= m);
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nv + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.nv..(i + 1) * self.grid.nv]
    }

    fn check_truncation(&self) {
        let nv = self.grid.nv;
        let peak = self.values.iter().fold(0.0f64, |a, &b| a.max(b));
        let edge = (0..self.grid.nx)
            .map(|i| self.at(i, 0).max(self.at(i, nv - 1)))
            .fold(0.0f64, f64::max);
        if edge > 1e-12 * peak {
            warn!("velocity box truncates the density: edge/peak = {:.3e}", edge / peak);
        }
    }
}

/// Density `μ`, momentum `μu` and velocity `u` on the x-cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFields {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub momentum: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn moments(rho: &PhaseDensity) -> MomentFields {
    let g = &rho.grid;
    let dv = g.dv();
    let vs = g.vs();
    let mut mu = vec![0.0; g.nx];
    let mut momentum = vec![0.0; g.nx];
    for i in 0..g.nx {
        for (r, v) in rho.row(i).iter().zip(&vs) {
            mu[i] += r * dv;
            momentum[i] += r * v * dv;
        }
    }
    let u = velocity_with_floor(&mu, &momentum);
    MomentFields { x: g.xs(), mu, momentum, u }
}

/// `∫ v² ρ dv` per x-cell.
pub fn second_moment(rho: &PhaseDensity) -> Vec<f64> {
    let g = &rho.grid;
    let vs = g.vs();
    (0..g.nx).map(|i| rho.row(i).iter().zip(&vs).map(|(r, v)| r * v * v).sum::<f64>() * g.dv()).collect()
}

/// `u = q / μ` where `μ` exceeds the relative floor, zero elsewhere.
pub(crate) fn velocity_with_floor(mu: &[f64], q: &[f64]) -> Vec<f64> {
    let peak = mu.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = DENSITY_FLOOR * peak;
    mu.iter().zip(q).map(|(&m, &q)| if m > floor && m > 0.0 { q / m } else { 0.0 }).collect()
}

/// Phase density together with the chemical field it drives and is driven by.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub t: f64,
    pub density: PhaseDensity,
    pub chem: Option<ChemicalField>,
}

impl KineticState {
    pub fn new(density: PhaseDensity) -> Self {
        Self { t: 0.0, density, chem: None }
    }

    pub fn with_chem(mut self, field: ChemicalField) -> Result<Self> {
        field.validate()?;
        if field.grid.dim() != 1 {
            return Err(Error::DimensionMismatch { left: field.grid.dim(), right: 1 });
        }
        self.chem = Some(field);
        Ok(self)
    }
}

/// One Strang-split step of size `dt`.
pub fn step_vlasov(state: &KineticState, model: &ModelSpec, dt: f64) -> Result<KineticState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt_time", "must be finite and > 0"));
    }
    model.validate(1)?;
    let g = state.density.grid.clone();
    let mut out = state.clone();
    let mass_before = state.density.mass();

    if let Some(chem) = model.chemistry() {
        let field = out.chem.as_mut().ok_or(Error::MissingChemicalField)?;
        let time_scale = model.friction.unwrap_or(1.0);
        let source = density_source_cells(field, &chem.chi(), &moments(&state.density).mu, &g.cells());
        let h = dt / time_scale;
        let cfl = chemical_cfl(field, chem.diffusivity, chem.kappa, h);
        let substeps = (cfl / CHEM_CFL_LIMIT).ceil().max(1.0) as usize;
        advance_chemical(field, &source, chem.diffusivity, chem.kappa, h / substeps as f64, substeps)?;
    }

    let vmax = g.v_min.abs().max(g.v_max.abs()) - 0.5 * g.dv();
    let cfl_x = vmax * dt / g.dx();
    if cfl_x > 1.0 {
        return Err(Error::Cfl { section: "vlasov_x", number: cfl_x, limit: 1.0 });
    }

    let rho = &mut out.density;
    advect::shift_x(rho, 0.5 * dt);
    clip(rho, "x");
    let force = vlasov_force_field(rho, model, out.chem.as_ref())?;
    let cfl_v = force.max_abs(&g) * dt / g.dv();
    if cfl_v > 1.0 {
        return Err(Error::Cfl { section: "vlasov_v", number: cfl_v, limit: 1.0 });
    }
    let leaked = advect::remap_v(rho, &force, dt);
    if leaked > 1e-12 {
        warn!("velocity boundary leaked mass {leaked:.3e}");
    }
    clip(rho, "v");
    advect::shift_x(rho, 0.5 * dt);
    clip(rho, "x");

    if rho.values.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite { what: "phase density", step: 0 });
    }
    let drift = (rho.mass() - mass_before).abs();
    if drift > MASS_DRIFT_LIMIT {
        return Err(Error::MassDrift { section: "vlasov", drift, limit: MASS_DRIFT_LIMIT });
    }
    out.t += dt;
    Ok(out)
}

/// Runs `steps` steps, numbering errors by step.
pub fn run_vlasov(state: &KineticState, model: &ModelSpec, dt: f64, steps: usize) -> Result<KineticState> {
    let mut s = state.clone();
    for k in 0..steps {
        s = step_vlasov(&s, model, dt).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { what, step: k },
            other => other,
        })?;
    }
    Ok(s)
}

/// Chemical source `χ * μ` on the field nodes, by midpoint quadrature over x-cells.
pub(crate) fn density_source_cells(
    field: &ChemicalField,
    chi: &crate::model::RaisedCosine,
    mu: &[f64],
    g: &Cells,
) -> Vec<f64> {
    let mut s = vec![0.0; field.grid.len()];
    let dx = g.dx;
    for (i, &m) in mu.iter().enumerate() {
        if m != 0.0 {
            deposit_sources(&field.grid, chi, &[g.x(i)], m * dx, &mut s);
        }
    }
    s
}

/// Zeroes negative overshoots and rescales to the pre-clip mass.
fn clip(rho: &mut PhaseDensity, stage: &str) {
    let total: f64 = rho.values.iter().sum();
    let mut clipped = 0usize;
    for r in rho.values.iter_mut() {
        if *r < 0.0 {
            *r = 0.0;
            clipped += 1;
        }
    }
    if clipped > 0 {
        let after: f64 = rho.values.iter().sum();
        if after > 0.0 {
            let s = total / after;
            rho.values.iter_mut().for_each(|r| *r *= s);
        }
        debug!("{stage}-remap clipped {clipped} negative cells");
    }
}
