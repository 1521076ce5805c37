//! Interaction laws for the microscopic system: pure force evaluation, no
//! time stepping.

mod ensemble;
mod field;
pub mod kernels;

pub use ensemble::{Domain, ParticleEnsemble};
pub use field::{deposit_sources, Boundary, ChemicalField, FieldGrid};
pub use kernels::{
    CuckerSmale, ExternalForce, KrauseKernel, PairPotential, RaisedCosine, RankWeight, Sign,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoBody,
    CuckerSmale,
    Topological,
    Chemotaxis,
    MultiAgent,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoBody => "two_body",
            ModelKind::CuckerSmale => "cucker_smale",
            ModelKind::Topological => "topological",
            ModelKind::Chemotaxis => "chemotaxis",
            ModelKind::MultiAgent => "multi_agent",
        }
    }
}

/// Pair interaction carried by the chemotaxis law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairLaw {
    #[default]
    None,
    TwoBody {
        potential: PairPotential,
        #[serde(default)]
        sign: Sign,
    },
    CuckerSmale(CuckerSmale),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chemotaxis {
    #[serde(default)]
    pub pair: PairLaw,
    pub eta: f64,
    #[serde(rename = "kappa_per_time")]
    pub kappa: f64,
    #[serde(rename = "diffusivity_length2_per_time")]
    pub diffusivity: f64,
    #[serde(rename = "chi_radius_length")]
    pub chi_radius: f64,
    #[serde(default)]
    pub external: Option<ExternalForce>,
}

impl Chemotaxis {
    pub fn chi(&self) -> RaisedCosine {
        RaisedCosine { radius: self.chi_radius }
    }
}

/// Index-dependent Krause opinion dynamics, `dξ_i/dt = (1/N) Σ_j w_ij σ(ξ_i - ξ_j)`
/// with `σ(z) = -φ(|z|) z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAgent {
    pub kernel: KrauseKernel,
    /// Row-major `N x N` weight matrix `w_ij`; all ones when absent.
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interaction {
    TwoBody {
        potential: PairPotential,
        #[serde(default)]
        sign: Sign,
    },
    CuckerSmale(CuckerSmale),
    Topological {
        weight: RankWeight,
        #[serde(default)]
        sign: Sign,
    },
    Chemotaxis(Chemotaxis),
    MultiAgent(MultiAgent),
}

/// Which interaction law drives the agents, plus the optional large-mass
/// friction variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub law: Interaction,
    /// `ε` of the friction variant: mass `1/ε`, a `-v` drag, time measured
    /// in units rescaled by `ε`.
    #[serde(default, rename = "friction_mass_scale")]
    pub friction: Option<f64>,
}

impl ModelSpec {
    pub fn new(law: Interaction) -> Self {
        Self { law, friction: None }
    }

    pub fn with_friction(mut self, eps: f64) -> Self {
        self.friction = Some(eps);
        self
    }

    pub fn two_body(potential: PairPotential, sign: Sign) -> Self {
        Self::new(Interaction::TwoBody { potential, sign })
    }

    pub fn cucker_smale(coupling: f64, radius: f64, decay: f64, sign: Sign) -> Self {
        Self::new(Interaction::CuckerSmale(CuckerSmale { coupling, radius, decay, sign }))
    }

    pub fn kind(&self) -> ModelKind {
        match self.law {
            Interaction::TwoBody { .. } => ModelKind::TwoBody,
            Interaction::CuckerSmale(_) => ModelKind::CuckerSmale,
            Interaction::Topological { .. } => ModelKind::Topological,
            Interaction::Chemotaxis(_) => ModelKind::Chemotaxis,
            Interaction::MultiAgent(_) => ModelKind::MultiAgent,
        }
    }

    pub fn chemistry(&self) -> Option<&Chemotaxis> {
        match &self.law {
            Interaction::Chemotaxis(c) => Some(c),
            _ => None,
        }
    }

    /// Indistinguishable particles: every law except the multi-agent one.
    pub fn is_exchangeable(&self) -> bool {
        self.kind() != ModelKind::MultiAgent
    }

    /// The multi-agent law is a first-order system in the positions.
    pub fn is_first_order(&self) -> bool {
        self.kind() == ModelKind::MultiAgent
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(eps) = self.friction {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::invalid("friction_mass_scale", format!("must lie in (0, 1], got {eps}")));
            }
            if self.is_first_order() {
                return Err(Error::Unsupported("friction variant of a first-order law".into()));
            }
        }
        match &self.law {
            Interaction::TwoBody { potential, .. } => potential.validate(),
            Interaction::CuckerSmale(cs) => cs.validate(),
            Interaction::Topological { weight, .. } => weight.validate(),
            Interaction::Chemotaxis(c) => {
                match &c.pair {
                    PairLaw::None => {}
                    PairLaw::TwoBody { potential, .. } => potential.validate()?,
                    PairLaw::CuckerSmale(cs) => cs.validate()?,
                }
                kernels::finite_nonneg("eta", c.eta)?;
                kernels::finite_nonneg("kappa_per_time", c.kappa)?;
                kernels::finite_nonneg("diffusivity_length2_per_time", c.diffusivity)?;
                RaisedCosine::new(c.chi_radius)?;
                if let Some(ext) = &c.external {
                    ext.validate(dim)?;
                }
                Ok(())
            }
            Interaction::MultiAgent(m) => {
                kernels::positive("confidence_radius_length", m.kernel.confidence_radius)?;
                if let Some(w) = &m.weights {
                    if w.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(Error::invalid("weights", "must be finite"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Lipschitz bound of the force in `(x, v)` used by the explicit
    /// integrator's stability guard. Velocity-dependent laws use the bound in
    /// `v` only; the chemical gradient is not included.
    pub fn lipschitz_bound(&self, dim: usize) -> f64 {
        let pair = |p: &PairLaw| match p {
            PairLaw::None => 0.0,
            PairLaw::TwoBody { potential, .. } => potential.gradient_lipschitz(dim),
            PairLaw::CuckerSmale(cs) => 2.0 * cs.coupling,
        };
        let base = match &self.law {
            Interaction::TwoBody { potential, .. } => potential.gradient_lipschitz(dim),
            Interaction::CuckerSmale(cs) => 2.0 * cs.coupling,
            Interaction::Topological { weight, .. } => 2.0 * weight.eval(0.0),
            Interaction::Chemotaxis(c) => {
                pair(&c.pair) + c.external.as_ref().map_or(0.0, |e| e.lipschitz())
            }
            Interaction::MultiAgent(m) => {
                let wmax = m
                    .weights
                    .as_ref()
                    .map_or(1.0, |w| w.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs())));
                wmax * (1.0 + std::f64::consts::FRAC_PI_2)
            }
        };
        match self.friction {
            Some(eps) => (base + 1.0) / eps,
            None => base,
        }
    }
}

/// Borrowed view of a state on which forces are evaluated.
#[derive(Clone, Copy)]
pub(crate) struct State<'a> {
    pub dim: usize,
    pub domain: &'a Domain,
    pub x: &'a [f64],
    pub v: &'a [f64],
    pub chem: Option<&'a ChemicalField>,
}

impl<'a> State<'a> {
    pub fn of(ens: &'a ParticleEnsemble) -> Self {
        Self {
            dim: ens.dim,
            domain: &ens.domain,
            x: &ens.positions,
            v: &ens.velocities,
            chem: ens.chem.as_ref(),
        }
    }

    fn n(&self) -> usize {
        self.x.len() / self.dim
    }

    #[inline]
    fn xi(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn vi(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }
}

/// Force on particle `i` (acceleration, or velocity for first-order laws).
///
/// Sums run over all `j` including `j = i`, divided by `N`; every builtin
/// kernel contributes nothing at zero separation.
pub fn eval_force(model: &ModelSpec, ens: &ParticleEnsemble, i: usize) -> Result<Vec<f64>> {
    if i >= ens.len() {
        return Err(Error::IndexOutOfRange { index: i, len: ens.len() });
    }
    if !ens.is_finite() {
        return Err(Error::NonFinite { what: "ensemble", step: 0 });
    }
    let mut out = vec![0.0; ens.dim];
    force_on(model, &State::of(ens), i, &mut out)?;
    Ok(out)
}

/// Forces on every particle, particle-major.
pub fn eval_forces(model: &ModelSpec, ens: &ParticleEnsemble) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ens.positions.len()];
    forces_into(model, &State::of(ens), &mut out)?;
    Ok(out)
}

/// `M(x_i, r) = (1/N) #{k : |x_k - x_i| <= r}`, ties counted inside.
pub fn rank_function(ens: &ParticleEnsemble, i: usize, r: f64) -> Result<f64> {
    if i >= ens.len() {
        return Err(Error::IndexOutOfRange { index: i, len: ens.len() });
    }
    if !(r >= 0.0) {
        return Err(Error::invalid("r", "rank radius must be >= 0"));
    }
    let xi = ens.position(i);
    let count = (0..ens.len())
        .filter(|&k| ens.domain.dist2(ens.position(k), xi).sqrt() <= r)
        .count();
    Ok(count as f64 / ens.len() as f64)
}

/// Gradient of the chemical concentration at `x`.
pub fn chem_gradient(field: &ChemicalField, x: &[f64]) -> Result<Vec<f64>> {
    field.gradient(x)
}

fn chem_needed<'a>(s: &State<'a>) -> Result<&'a ChemicalField> {
    s.chem.ok_or(Error::MissingChemicalField)
}

fn weights_for(m: &MultiAgent, n: usize) -> Result<Option<&Vec<Vec<f64>>>> {
    match &m.weights {
        Some(w) if w.len() != n || w.iter().any(|r| r.len() != n) => {
            Err(Error::DimensionMismatch { left: w.len(), right: n })
        }
        other => Ok(other.as_ref()),
    }
}

/// Direct summation for a single particle.
pub(crate) fn force_on(model: &ModelSpec, s: &State<'_>, i: usize, out: &mut [f64]) -> Result<()> {
    let d = s.dim;
    let n = s.n();
    let inv_n = 1.0 / n as f64;
    let mut dz = vec![0.0; d];
    out.iter_mut().for_each(|o| *o = 0.0);

    let two_body = |potential: &PairPotential, sign: Sign, out: &mut [f64], dz: &mut [f64]| {
        let xi = s.xi(i);
        for j in 0..n {
            s.domain.delta(xi, s.xi(j), dz);
            let r2: f64 = dz.iter().map(|z| z * z).sum();
            let g = sign.value() * potential.grad_factor(r2, d) * inv_n;
            for k in 0..d {
                out[k] += g * dz[k];
            }
        }
    };
    let alignment = |cs: &CuckerSmale, out: &mut [f64]| {
        let (xi, vi) = (s.xi(i), s.vi(i));
        for j in 0..n {
            let w = cs.sign.value() * cs.coupling * cs.weight(s.domain.dist2(xi, s.xi(j))) * inv_n;
            let vj = s.vi(j);
            for k in 0..d {
                out[k] += w * (vi[k] - vj[k]);
            }
        }
    };

    match &model.law {
        Interaction::TwoBody { potential, sign } => two_body(potential, *sign, out, &mut dz),
        Interaction::CuckerSmale(cs) => alignment(cs, out),
        Interaction::Topological { weight, sign } => {
            let xi = s.xi(i);
            let dist: Vec<f64> = (0..n).map(|j| s.domain.dist2(xi, s.xi(j)).sqrt()).collect();
            let mut sorted = dist.clone();
            sorted.sort_by(f64::total_cmp);
            let vi = s.vi(i);
            for j in 0..n {
                let inside = sorted.partition_point(|&r| r <= dist[j]);
                let m = inside as f64 * inv_n;
                let w = sign.value() * weight.eval(m) * inv_n;
                let vj = s.vi(j);
                for k in 0..d {
                    out[k] += w * (vi[k] - vj[k]);
                }
            }
        }
        Interaction::Chemotaxis(c) => {
            let field = chem_needed(s)?;
            match &c.pair {
                PairLaw::None => {}
                PairLaw::TwoBody { potential, sign } => two_body(potential, *sign, out, &mut dz),
                PairLaw::CuckerSmale(cs) => alignment(cs, out),
            }
            let grad = field.gradient(s.xi(i))?;
            for k in 0..d {
                out[k] += c.eta * grad[k];
            }
            if let Some(ext) = &c.external {
                ext.add_to(s.xi(i), out);
            }
        }
        Interaction::MultiAgent(m) => {
            let w = weights_for(m, n)?;
            let xi = s.xi(i);
            for j in 0..n {
                s.domain.delta(xi, s.xi(j), &mut dz);
                let r2: f64 = dz.iter().map(|z| z * z).sum();
                let wij = w.map_or(1.0, |w| w[i][j]);
                let f = -wij * m.kernel.cutoff(r2) * inv_n;
                for k in 0..d {
                    out[k] += f * dz[k];
                }
            }
        }
    }
    if model.friction.is_some() {
        let vi = s.vi(i);
        for k in 0..d {
            out[k] -= vi[k];
        }
    }
    Ok(())
}

/// Forces on all particles. Pair-symmetric laws accumulate each pair once;
/// linear gradients on a free domain collapse onto the centre of mass.
pub(crate) fn forces_into(model: &ModelSpec, s: &State<'_>, out: &mut [f64]) -> Result<()> {
    let d = s.dim;
    let n = s.n();
    let inv_n = 1.0 / n as f64;
    out.iter_mut().for_each(|o| *o = 0.0);

    let two_body = |potential: &PairPotential, sign: Sign, out: &mut [f64]| {
        if potential.is_linear() && !s.domain.is_periodic() {
            let k = sign.value() * potential.grad_factor(0.0, d);
            let mut mean = vec![0.0; d];
            for i in 0..n {
                for a in 0..d {
                    mean[a] += s.x[i * d + a];
                }
            }
            mean.iter_mut().for_each(|m| *m *= inv_n);
            for i in 0..n {
                for a in 0..d {
                    out[i * d + a] += k * (s.x[i * d + a] - mean[a]);
                }
            }
            return;
        }
        let mut dz = vec![0.0; d];
        for i in 0..n {
            for j in (i + 1)..n {
                s.domain.delta(s.xi(i), s.xi(j), &mut dz);
                let r2: f64 = dz.iter().map(|z| z * z).sum();
                let g = sign.value() * potential.grad_factor(r2, d) * inv_n;
                for a in 0..d {
                    out[i * d + a] += g * dz[a];
                    out[j * d + a] -= g * dz[a];
                }
            }
        }
    };
    let alignment = |cs: &CuckerSmale, out: &mut [f64]| {
        let scale = cs.sign.value() * cs.coupling * inv_n;
        for i in 0..n {
            for j in (i + 1)..n {
                let w = scale * cs.weight(s.domain.dist2(s.xi(i), s.xi(j)));
                for a in 0..d {
                    let dv = s.v[i * d + a] - s.v[j * d + a];
                    out[i * d + a] += w * dv;
                    out[j * d + a] -= w * dv;
                }
            }
        }
    };

    match &model.law {
        Interaction::TwoBody { potential, sign } => two_body(potential, *sign, out),
        Interaction::CuckerSmale(cs) => alignment(cs, out),
        Interaction::Chemotaxis(c) => {
            let field = chem_needed(s)?;
            match &c.pair {
                PairLaw::None => {}
                PairLaw::TwoBody { potential, sign } => two_body(potential, *sign, out),
                PairLaw::CuckerSmale(cs) => alignment(cs, out),
            }
            for i in 0..n {
                let grad = field.gradient(s.xi(i))?;
                let o = &mut out[i * d..(i + 1) * d];
                for a in 0..d {
                    o[a] += c.eta * grad[a];
                }
                if let Some(ext) = &c.external {
                    ext.add_to(s.xi(i), o);
                }
            }
        }
        Interaction::Topological { .. } | Interaction::MultiAgent(_) => {
            let no_friction = ModelSpec { law: model.law.clone(), friction: None };
            for i in 0..n {
                force_on(&no_friction, s, i, &mut out[i * d..(i + 1) * d])?;
            }
        }
    }
    if model.friction.is_some() {
        for (o, v) in out.iter_mut().zip(s.v) {
            *o -= v;
        }
    }
    Ok(())
}
