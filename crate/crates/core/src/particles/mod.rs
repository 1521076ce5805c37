//! Time stepping of the microscopic system and seeded replica ensembles.
//!
//! One step advances the chemical field first (explicit substeps driven by
//! the current positions), then kicks and drifts the particles in the
//! updated field. This first-order splitting is the error model assumed by
//! the convergence studies.

mod chemical;
mod replicas;

pub use chemical::{chemical_cfl, source_values, step_chemical, ChemSource, CHEM_CFL_LIMIT};
pub(crate) use chemical::advance_chemical;
pub use replicas::{
    particle_rng, run_replicas, sample_initial, InitialLaw, ReplicaPlan, ReplicaRun, ReplicaState, Snapshot,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forces_into, Interaction, ModelSpec, PairLaw, ParticleEnsemble, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    SemiImplicitEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    #[serde(rename = "dt_time")]
    pub dt: f64,
    #[serde(rename = "t_final_time")]
    pub t_final: f64,
    #[serde(default = "one", rename = "substeps_chem")]
    pub substeps_chem: usize,
}

fn one() -> usize {
    1
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_final: f64) -> Self {
        Self { scheme: Scheme::Rk4, dt, t_final, substeps_chem: 1 }
    }

    pub fn validate(&self, model: &ModelSpec, dim: usize) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt_time", "must be finite and > 0"));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::invalid("t_final_time", "must be finite and >= 0"));
        }
        if self.substeps_chem == 0 {
            return Err(Error::invalid("substeps_chem", "must be >= 1"));
        }
        if self.scheme == Scheme::SemiImplicitEuler {
            let number = self.dt * model.lipschitz_bound(dim);
            if number >= 1.0 {
                return Err(Error::Cfl { section: "integrator", number, limit: 1.0 });
            }
        }
        Ok(())
    }
}

/// Advances the ensemble by one `cfg.dt`.
pub fn step_particles(ens: &ParticleEnsemble, model: &ModelSpec, cfg: &IntegratorConfig) -> Result<ParticleEnsemble> {
    let mut out = ens.clone();
    let mut work = Workspace::new(ens.positions.len());
    advance(&mut out, model, cfg, cfg.dt, 0, &mut work)?;
    Ok(out)
}

pub(crate) struct Workspace {
    k: [Vec<f64>; 8],
    x: Vec<f64>,
    v: Vec<f64>,
}

impl Workspace {
    pub fn new(len: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; len]), x: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// Right-hand side `(dx, dv)` of the first-order system.
fn rhs(
    model: &ModelSpec,
    ens: &ParticleEnsemble,
    x: &[f64],
    v: &[f64],
    dx: &mut [f64],
    dv: &mut [f64],
) -> Result<()> {
    let state = State { dim: ens.dim, domain: &ens.domain, x, v, chem: ens.chem.as_ref() };
    forces_into(model, &state, dv)?;
    let d = ens.dim;
    if model.is_first_order() {
        dx.copy_from_slice(dv);
        dv.iter_mut().for_each(|a| *a = 0.0);
    } else if let Some(eps) = model.friction {
        // rescaled time: dx/ds = v, ε dv/ds = F - v
        dx.copy_from_slice(v);
        dv.iter_mut().for_each(|a| *a /= eps);
    } else {
        for (i, m) in ens.masses.iter().enumerate() {
            for a in 0..d {
                dx[i * d + a] = v[i * d + a] / m;
            }
        }
    }
    Ok(())
}

/// Advances `ens` in place by `dt` (which may differ from `cfg.dt` on the
/// last step before a snapshot).
pub(crate) fn advance(
    ens: &mut ParticleEnsemble,
    model: &ModelSpec,
    cfg: &IntegratorConfig,
    dt: f64,
    step: usize,
    work: &mut Workspace,
) -> Result<()> {
    if let Some(chem) = model.chemistry() {
        let field = ens.chem.as_mut().ok_or(Error::MissingChemicalField)?;
        let sub = cfg.substeps_chem;
        let time_scale = model.friction.unwrap_or(1.0);
        let source = source_values(field, chem, ChemSource::Particles(&ens.positions))?;
        advance_chemical(field, &source, chem.diffusivity, chem.kappa, dt / sub as f64 / time_scale, sub)
            .map_err(|e| with_step(e, step))?;
    }

    let n = ens.positions.len();
    let Workspace { k, x, v } = work;
    let [k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v] = k;
    match cfg.scheme {
        Scheme::Rk4 => {
            rhs(model, ens, &ens.positions, &ens.velocities, k1x, k1v)?;
            for i in 0..n {
                x[i] = ens.positions[i] + 0.5 * dt * k1x[i];
                v[i] = ens.velocities[i] + 0.5 * dt * k1v[i];
            }
            rhs(model, ens, x, v, k2x, k2v)?;
            for i in 0..n {
                x[i] = ens.positions[i] + 0.5 * dt * k2x[i];
                v[i] = ens.velocities[i] + 0.5 * dt * k2v[i];
            }
            rhs(model, ens, x, v, k3x, k3v)?;
            for i in 0..n {
                x[i] = ens.positions[i] + dt * k3x[i];
                v[i] = ens.velocities[i] + dt * k3v[i];
            }
            rhs(model, ens, x, v, k4x, k4v)?;
            for i in 0..n {
                ens.positions[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                ens.velocities[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
            if model.is_first_order() {
                // report the velocity field at the new positions
                rhs(model, ens, &ens.positions, &ens.velocities, k1x, k1v)?;
                ens.velocities.copy_from_slice(k1x);
            }
        }
        Scheme::SemiImplicitEuler => {
            rhs(model, ens, &ens.positions, &ens.velocities, k1x, k1v)?;
            if model.is_first_order() {
                for i in 0..n {
                    ens.positions[i] += dt * k1x[i];
                }
                ens.velocities.copy_from_slice(k1x);
            } else {
                for i in 0..n {
                    ens.velocities[i] += dt * k1v[i];
                }
                // drift with the updated velocities
                rhs_drift(model, ens, k2x);
                for i in 0..n {
                    ens.positions[i] += dt * k2x[i];
                }
            }
        }
    }
    let d = ens.dim;
    let domain = ens.domain.clone();
    domain.wrap(&mut ens.positions, d);
    if !ens.is_finite() {
        return Err(Error::NonFinite { what: "particle state", step });
    }
    Ok(())
}

fn rhs_drift(model: &ModelSpec, ens: &ParticleEnsemble, dx: &mut [f64]) {
    let d = ens.dim;
    if model.friction.is_some() {
        dx.copy_from_slice(&ens.velocities);
    } else {
        for (i, m) in ens.masses.iter().enumerate() {
            for a in 0..d {
                dx[i * d + a] = ens.velocities[i * d + a] / m;
            }
        }
    }
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, step },
        other => other,
    }
}

/// Total energy `Σ v²/2m + (1/2N) Σ_{i,j} U(x_i - x_j)` of a two-body law,
/// where `U = -sign · V` is the potential generating the force.
pub fn two_body_energy(model: &ModelSpec, ens: &ParticleEnsemble) -> Result<f64> {
    let (potential, sign) = match &model.law {
        Interaction::TwoBody { potential, sign } => (potential, *sign),
        Interaction::Chemotaxis(c) => match &c.pair {
            PairLaw::TwoBody { potential, sign } => (potential, *sign),
            _ => return Err(Error::Unsupported("energy needs a two-body potential".into())),
        },
        _ => return Err(Error::Unsupported("energy needs a two-body potential".into())),
    };
    let n = ens.len();
    let kinetic: f64 = (0..n)
        .map(|i| ens.velocity(i).iter().map(|v| v * v).sum::<f64>() / (2.0 * ens.masses[i]))
        .sum();
    let mut pot = 0.0;
    for i in 0..n {
        for j in 0..n {
            pot += potential.value(ens.domain.dist2(ens.position(i), ens.position(j)), ens.dim);
        }
    }
    Ok(kinetic - sign.value() * pot / (2.0 * n as f64))
}
