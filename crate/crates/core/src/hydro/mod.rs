//! Finite-volume solvers on a periodic line: the nonlocal Euler system, its
//! friction-scaled variant, and the degenerate Keller-Segel equation.
//!
//! Euler states are conserved pairs `(μ, q = μu)`. The flux part uses
//! minmod-limited reconstruction of `(μ, u)` with a Rusanov flux; nonlocal
//! forces are evaluated by midpoint quadrature. Time stepping is two-stage
//! SSP Runge-Kutta, with the friction term treated linearly implicitly in
//! each stage so that the relaxation balance is reproduced at any step size.

mod keller_segel;

pub use keller_segel::{solve_cyclic_tridiagonal, solve_potential, step_keller_segel, DriftForm, KellerSegel};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::{moment_force, velocity_with_floor, Cells, KernelRange, PhaseDensity, PhaseGrid};
use crate::model::{
    Boundary, ChemicalField, Chemotaxis, FieldGrid, Interaction, ModelSpec, PairLaw, PairPotential, Sign,
};
use crate::particles::{advance_chemical, chemical_cfl, CHEM_CFL_LIMIT};

pub const HYPERBOLIC_CFL_LIMIT: f64 = 0.9;
pub const MASS_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroGrid {
    #[serde(rename = "x_min_length")]
    pub x_min: f64,
    #[serde(rename = "x_max_length")]
    pub x_max: f64,
    pub nx: usize,
    #[serde(default)]
    pub kernel_range: KernelRange,
}

impl HydroGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        let g = Self { x_min, x_max, nx, kernel_range: KernelRange::default() };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::invalid("x_range", "needs finite x_min < x_max"));
        }
        if self.nx < 4 {
            return Err(Error::invalid("nx", "needs at least 4 cells"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn field_grid(&self) -> Result<FieldGrid> {
        FieldGrid::line(self.x_min, self.x_max, self.nx, Boundary::Periodic)
    }

    pub(crate) fn cells(&self) -> Cells {
        Cells { nx: self.nx, x_min: self.x_min, dx: self.dx(), range: self.kernel_range }
    }

    /// The x-part of a phase grid.
    pub fn of_phase(g: &PhaseGrid) -> Self {
        Self { x_min: g.x_min, x_max: g.x_max, nx: g.nx, kernel_range: g.kernel_range }
    }
}

/// How the convective flux is weighted in the friction-scaled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectiveScaling {
    /// `ε ∂_t q + ∂_x(q u) = …`: only the time derivative carries `ε`.
    #[default]
    TimeDerivative,
    /// `ε (∂_t q + ∂_x(q u)) = …`, the form obtained from the particle
    /// system after rescaling time.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroParams {
    /// Time scale `ε` of the friction-scaled system.
    #[serde(default = "one")]
    pub eps: f64,
    /// Pressure coefficient `ε_p` of `p = ε_p μ² / 2`.
    #[serde(default)]
    pub pressure: f64,
    #[serde(default)]
    pub convection: ConvectiveScaling,
}

fn one() -> f64 {
    1.0
}

impl Default for HydroParams {
    fn default() -> Self {
        Self { eps: 1.0, pressure: 0.0, convection: ConvectiveScaling::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroState {
    pub t: f64,
    pub grid: HydroGrid,
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
    pub psi: Option<ChemicalField>,
    pub params: HydroParams,
}

impl HydroState {
    /// State with density `mu` (normalised to unit mass) and velocity `u`.
    pub fn new(grid: HydroGrid, mu: Vec<f64>, u: &[f64]) -> Result<Self> {
        grid.validate()?;
        if mu.len() != grid.nx || u.len() != grid.nx {
            return Err(Error::DimensionMismatch { left: mu.len().max(u.len()), right: grid.nx });
        }
        if mu.iter().any(|m| !m.is_finite() || *m < 0.0) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu", "density must be finite and >= 0, velocity finite"));
        }
        let mass: f64 = mu.iter().sum::<f64>() * grid.dx();
        if mass <= 0.0 {
            return Err(Error::invalid("mu", "needs positive mass"));
        }
        let mu: Vec<f64> = mu.iter().map(|m| m / mass).collect();
        let q = mu.iter().zip(u).map(|(m, v)| m * v).collect();
        Ok(Self { t: 0.0, grid, mu, q, psi: None, params: HydroParams::default() })
    }

    pub fn from_fn(grid: HydroGrid, mu: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = grid.xs();
        let m: Vec<f64> = xs.iter().map(|&x| mu(x)).collect();
        let v: Vec<f64> = xs.iter().map(|&x| u(x)).collect();
        Self::new(grid, m, &v)
    }

    pub fn with_params(mut self, params: HydroParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_psi(mut self, field: ChemicalField) -> Result<Self> {
        field.validate()?;
        if field.grid.dim() != 1 || field.grid.len() != self.grid.nx {
            return Err(Error::DimensionMismatch { left: field.grid.len(), right: self.grid.nx });
        }
        self.psi = Some(field);
        Ok(self)
    }

    pub fn mass(&self) -> f64 {
        self.mu.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn total_momentum(&self) -> f64 {
        self.q.iter().sum::<f64>() * self.grid.dx()
    }

    /// Velocity with the vacuum rule applied.
    pub fn velocity(&self) -> Vec<f64> {
        velocity_with_floor(&self.mu, &self.q)
    }
}

/// Model of the friction-scaled Euler system: a repulsive mollified Dirac
/// potential and a raised-cosine chemical source, both of width `√ε`
/// (the source radius is twice the width).
pub fn keller_segel_eps_model(eps: f64, eta: f64, kappa: f64, diffusivity: f64) -> ModelSpec {
    let w = eps.sqrt();
    ModelSpec::new(Interaction::Chemotaxis(Chemotaxis {
        pair: PairLaw::TwoBody { potential: PairPotential::MollifiedDirac { width: w }, sign: Sign::Minus },
        eta,
        kappa,
        diffusivity,
        chi_radius: 2.0 * w,
        external: None,
    }))
    .with_friction(eps)
}

/// One step of the nonlocal Euler system. A model with the friction variant
/// is advanced in its friction-scaled form with that `ε`.
pub fn step_euler(s: &HydroState, model: &ModelSpec, dt: f64) -> Result<HydroState> {
    let eps = model.friction.unwrap_or(1.0);
    step_hydro(s, model, dt, eps, model.friction.is_some())
}

/// One step of the friction-scaled system with `ε = s.params.eps`.
pub fn step_euler_eps(s: &HydroState, model: &ModelSpec, dt: f64) -> Result<HydroState> {
    let eps = s.params.eps;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", "must be finite and > 0"));
    }
    if let Some(e) = model.friction {
        if e != eps {
            return Err(Error::invalid("friction_mass_scale", format!("model has {e}, state has {eps}")));
        }
    }
    let dx = s.grid.dx();
    let pair = match &model.law {
        Interaction::Chemotaxis(c) => Some(&c.pair),
        _ => None,
    };
    if let Some(PairLaw::TwoBody { potential: PairPotential::MollifiedDirac { width }, .. }) = pair {
        if width / dx < 4.0 {
            return Err(Error::invalid(
                "width_length",
                format!("mollifier width {width} must be at least 4 cells ({dx})"),
            ));
        }
    }
    step_hydro(s, model, dt, eps, true)
}

fn step_hydro(s: &HydroState, model: &ModelSpec, dt: f64, eps: f64, friction: bool) -> Result<HydroState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt_time", "must be finite and > 0"));
    }
    model.validate(1)?;
    if !(s.params.pressure.is_finite() && s.params.pressure >= 0.0) {
        return Err(Error::invalid("pressure", "must be finite and >= 0"));
    }
    if model.kind() == crate::model::ModelKind::MultiAgent {
        return Err(Error::Unsupported("multi-agent law has no hydrodynamic closure here".into()));
    }
    let g = s.grid.clone();
    let dx = g.dx();
    let mut out = s.clone();
    let mass_before = s.mass();

    if let Some(chem) = model.chemistry() {
        let field = out.psi.as_mut().ok_or(Error::MissingChemicalField)?;
        let source = crate::kinetic::density_source_cells(field, &chem.chi(), &s.mu, &g.cells());
        let h = dt / eps;
        let cfl = chemical_cfl(field, chem.diffusivity, chem.kappa, h);
        let substeps = (cfl / CHEM_CFL_LIMIT).ceil().max(1.0) as usize;
        advance_chemical(field, &source, chem.diffusivity, chem.kappa, h / substeps as f64, substeps)?;
    }

    let conv = match s.params.convection {
        ConvectiveScaling::TimeDerivative => 1.0 / eps,
        ConvectiveScaling::Full => 1.0,
    };
    let ops = Operator { cells: g.cells(), law: &model.law, psi: out.psi.as_ref(), conv, pressure: s.params.pressure / eps, force: 1.0 / eps };

    let speed = ops.max_speed(&s.mu, &s.q);
    let cfl = speed * dt / dx;
    if cfl > HYPERBOLIC_CFL_LIMIT {
        return Err(Error::Cfl { section: "euler", number: cfl, limit: HYPERBOLIC_CFL_LIMIT });
    }

    let damp = if friction { 1.0 / (1.0 + dt / eps) } else { 1.0 };
    let stage = |mu: &[f64], q: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (rm, rq) = ops.rhs(mu, q)?;
        let m: Vec<f64> = mu.iter().zip(&rm).map(|(a, r)| a + dt * r).collect();
        let p: Vec<f64> = q.iter().zip(&rq).map(|(a, r)| (a + dt * r) * damp).collect();
        Ok((m, p))
    };
    let (m1, q1) = stage(&s.mu, &s.q)?;
    let (m2, q2) = stage(&m1, &q1)?;
    out.mu = s.mu.iter().zip(&m2).map(|(a, b)| 0.5 * (a + b)).collect();
    out.q = s.q.iter().zip(&q2).map(|(a, b)| 0.5 * (a + b)).collect();

    let mut clipped = 0;
    for m in out.mu.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
            clipped += 1;
        }
    }
    if clipped > 0 {
        debug!("euler step clipped {clipped} negative density cells");
    }
    if out.mu.iter().chain(&out.q).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "hydro state", step: 0 });
    }
    let drift = (out.mass() - mass_before).abs();
    if drift > MASS_DRIFT_LIMIT {
        return Err(Error::MassDrift { section: "euler", drift, limit: MASS_DRIFT_LIMIT });
    }
    out.t += dt;
    Ok(out)
}

struct Operator<'a> {
    cells: Cells,
    law: &'a Interaction,
    psi: Option<&'a ChemicalField>,
    /// weight of `∂_x(q u)` in `∂_t q`
    conv: f64,
    /// weight of `∂_x p` with `p = μ²/2`
    pressure: f64,
    /// weight of the interaction source
    force: f64,
}

impl Operator<'_> {
    fn sound2(&self, mu: f64) -> f64 {
        self.pressure * mu
    }

    /// Bound on the spectral radius of the flux Jacobian.
    fn wave_speed(&self, mu: f64, u: f64) -> f64 {
        let k = self.conv;
        k * u.abs() + ((k * k - k).max(0.0) * u * u + self.sound2(mu).max(0.0)).sqrt()
    }

    fn max_speed(&self, mu: &[f64], q: &[f64]) -> f64 {
        let u = velocity_with_floor(mu, q);
        mu.iter().zip(&u).map(|(&m, &v)| self.wave_speed(m, v)).fold(0.0, f64::max)
    }

    fn rhs(&self, mu: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = mu.len();
        let dx = self.cells.dx;
        let u = velocity_with_floor(mu, q);
        let at = |v: &[f64], k: isize| v[k.rem_euclid(n as isize) as usize];
        let minmod = |a: f64, b: f64| if a * b <= 0.0 { 0.0 } else if a.abs() < b.abs() { a } else { b };
        let slope = |v: &[f64], i: usize| {
            let i = i as isize;
            minmod(at(v, i) - at(v, i - 1), at(v, i + 1) - at(v, i))
        };
        let sm: Vec<f64> = (0..n).map(|i| slope(mu, i)).collect();
        let su: Vec<f64> = (0..n).map(|i| slope(&u, i)).collect();

        // flux through the right face of each cell
        let mut fm = vec![0.0; n];
        let mut fq = vec![0.0; n];
        for i in 0..n {
            let r = (i + 1) % n;
            let (ml, ul) = (mu[i] + 0.5 * sm[i], u[i] + 0.5 * su[i]);
            let (mr, ur) = (mu[r] - 0.5 * sm[r], u[r] - 0.5 * su[r]);
            let a = self.wave_speed(ml, ul).max(self.wave_speed(mr, ur));
            let flux_q = |m: f64, v: f64| self.conv * m * v * v + 0.5 * self.pressure * m * m;
            fm[i] = 0.5 * (ml * ul + mr * ur) - 0.5 * a * (mr - ml);
            fq[i] = 0.5 * (flux_q(ml, ul) + flux_q(mr, ur)) - 0.5 * a * (mr * ur - ml * ul);
        }
        let f = moment_force(&self.cells, mu, q, self.law, self.psi)?;
        let mut rm = vec![0.0; n];
        let mut rq = vec![0.0; n];
        for i in 0..n {
            let l = (i + n - 1) % n;
            rm[i] = -(fm[i] - fm[l]) / dx;
            rq[i] = -(fq[i] - fq[l]) / dx + self.force * (f.slope[i] * q[i] + f.offset[i] * mu[i]);
        }
        Ok((rm, rq))
    }
}

/// Phase density `μ⁰(x) N(v; u⁰(x), σ_v²)`, each column normalised on the
/// velocity grid, then the whole to unit mass.
pub fn monokinetic_init(grid: PhaseGrid, mu: &[f64], u: &[f64], sigma_v: f64) -> Result<PhaseDensity> {
    grid.validate()?;
    if mu.len() != grid.nx || u.len() != grid.nx {
        return Err(Error::DimensionMismatch { left: mu.len().max(u.len()), right: grid.nx });
    }
    if !(sigma_v >= grid.dv()) {
        return Err(Error::invalid("sigma_v", format!("must resolve the velocity grid (dv = {})", grid.dv())));
    }
    let vs = grid.vs();
    let mut values = Vec::with_capacity(grid.len());
    let mut col = vec![0.0; grid.nv];
    for i in 0..grid.nx {
        for (c, v) in col.iter_mut().zip(&vs) {
            let z = (v - u[i]) / sigma_v;
            *c = (-0.5 * z * z).exp();
        }
        let s: f64 = col.iter().sum::<f64>() * grid.dv();
        values.extend(col.iter().map(|c| mu[i].max(0.0) * c / s));
    }
    let mut rho = PhaseDensity::from_values(grid, values)?;
    rho.normalize()?;
    Ok(rho)
}

#[cfg(test)]
mod tests;
