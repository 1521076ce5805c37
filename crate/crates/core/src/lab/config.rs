use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::profile::Profile;
use crate::error::{Error, Result};
use crate::hydro::{ConvectiveScaling, HydroGrid, HydroParams, KellerSegel};
use crate::kinetic::PhaseGrid;
use crate::model::{Boundary, ChemicalField, Domain, FieldGrid, ModelSpec};
use crate::particles::{InitialLaw, IntegratorConfig, ReplicaPlan};
use crate::transport::{Quantization, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Particles,
    Vlasov,
    Euler,
    KellerSegel,
    /// Particles against the Vlasov solution.
    ComparePv,
    /// Vlasov against Euler.
    CompareVe,
    RateStudy,
    EpsSweep,
    KsLimit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Particles => "particles",
            ExperimentKind::Vlasov => "vlasov",
            ExperimentKind::Euler => "euler",
            ExperimentKind::KellerSegel => "keller_segel",
            ExperimentKind::ComparePv => "compare_pv",
            ExperimentKind::CompareVe => "compare_ve",
            ExperimentKind::RateStudy => "rate_study",
            ExperimentKind::EpsSweep => "eps_sweep",
            ExperimentKind::KsLimit => "ks_limit",
        }
    }
}

/// Whole experiment description, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    /// Worker threads; `MEANFIELD_THREADS` overrides it.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub particles: Option<ParticlesSection>,
    #[serde(default)]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub phase_grid: Option<PhaseGrid>,
    #[serde(default)]
    pub vlasov: Option<VlasovSection>,
    #[serde(default)]
    pub hydro: Option<HydroSection>,
    #[serde(default)]
    pub keller_segel: Option<KellerSegelSection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub rate_study: Option<RateStudySection>,
    #[serde(default)]
    pub eps_sweep: Option<EpsSweepSection>,
    #[serde(default)]
    pub ks_limit: Option<KsLimitSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesSection {
    pub replicas: usize,
    pub seed: u64,
    /// Particles per replica; the rate study takes its own list instead.
    #[serde(default)]
    pub count: Option<usize>,
    pub dim: usize,
    #[serde(default = "one")]
    pub mass: f64,
    pub initial_law: InitialLaw,
    #[serde(default)]
    pub domain: Domain,
    #[serde(rename = "snapshot_times_time", default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub chemical: Option<ChemicalSection>,
}

fn one() -> f64 {
    1.0
}

impl ParticlesSection {
    pub fn plan(&self, count: usize) -> Result<ReplicaPlan> {
        let mut plan = ReplicaPlan::new(self.replicas, self.seed, count, self.dim, self.initial_law.clone());
        plan.mass = self.mass;
        plan.domain = self.domain.clone();
        plan.chem = self.chemical.as_ref().map(|c| c.field()).transpose()?;
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemicalSection {
    #[serde(rename = "lo_length")]
    pub lo: Vec<f64>,
    #[serde(rename = "hi_length")]
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
    pub boundary: Boundary,
    /// Initial concentration for one-dimensional grids; zero when absent.
    #[serde(default)]
    pub initial: Option<Profile>,
}

impl ChemicalSection {
    pub fn field(&self) -> Result<ChemicalField> {
        let grid = FieldGrid::new(self.lo.clone(), self.hi.clone(), self.nodes.clone(), self.boundary)?;
        match &self.initial {
            None => Ok(ChemicalField::zeros(grid)),
            Some(p) if grid.dim() == 1 => {
                p.validate()?;
                Ok(ChemicalField::from_fn(grid, |x| p.eval(x[0])))
            }
            Some(_) => Err(Error::Unsupported("initial chemical profiles are one-dimensional".into())),
        }
    }
}

/// Initial phase density of the Vlasov solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VlasovInitial {
    /// The particles' one-particle law.
    ParticleLaw,
    Law { law: InitialLaw },
    /// `μ⁰(x) N(v; u⁰(x), σ_v²)`.
    Monokinetic { density: Profile, velocity: Profile, sigma_v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlasovSection {
    #[serde(rename = "dt_time")]
    pub dt: f64,
    #[serde(rename = "snapshot_times_time")]
    pub snapshot_times: Vec<f64>,
    pub initial: VlasovInitial,
    /// Initial chemical concentration on the x-grid; zero when absent.
    #[serde(default)]
    pub chemical_initial: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroInitial {
    pub density: Profile,
    pub velocity: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroSection {
    /// Defaults to the x-part of `[phase_grid]`.
    #[serde(default)]
    pub grid: Option<HydroGrid>,
    #[serde(default)]
    pub params: HydroParams,
    #[serde(rename = "dt_time")]
    pub dt: f64,
    #[serde(rename = "snapshot_times_time", default)]
    pub snapshot_times: Vec<f64>,
    /// Defaults to the monokinetic Vlasov data when comparing.
    #[serde(default)]
    pub initial: Option<HydroInitial>,
    #[serde(default)]
    pub chemical_initial: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KellerSegelSection {
    pub params: KellerSegel,
    pub grid: HydroGrid,
    #[serde(rename = "dt_time")]
    pub dt: f64,
    #[serde(rename = "snapshot_times_time")]
    pub snapshot_times: Vec<f64>,
    pub initial_density: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default)]
    pub quantization: Quantization,
    #[serde(default)]
    pub solver: Solver,
    /// Marginal orders to evaluate, each 1 or 2.
    #[serde(default = "first_order")]
    pub orders: Vec<usize>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub sliced_seed: u64,
}

fn first_order() -> Vec<usize> {
    vec![1]
}

fn default_directions() -> usize {
    crate::transport::DEFAULT_DIRECTIONS
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            quantization: Quantization::default(),
            solver: Solver::default(),
            orders: first_order(),
            directions: default_directions(),
            sliced_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudySection {
    pub particle_counts: Vec<usize>,
    #[serde(rename = "t_time")]
    pub t: f64,
    /// Subtract the distance measured at `t = 0` in quadrature.
    #[serde(default = "yes")]
    pub subtract_floor: bool,
    #[serde(default)]
    pub quantization: Quantization,
    #[serde(default)]
    pub solver: Solver,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSweepSection {
    /// Pressure coefficients `ε_p`.
    pub pressures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsLimitSection {
    pub eps_values: Vec<f64>,
    pub eta: f64,
    #[serde(rename = "kappa_per_time")]
    pub kappa: f64,
    #[serde(rename = "diffusivity_length2_per_time", default = "one")]
    pub diffusivity: f64,
    pub grid: HydroGrid,
    #[serde(rename = "dt_time")]
    pub dt: f64,
    #[serde(rename = "t_final_time")]
    pub t_final: f64,
    pub initial_density: Profile,
    #[serde(default = "full")]
    pub convection: ConvectiveScaling,
}

fn full() -> ConvectiveScaling {
    ConvectiveScaling::Full
}

fn missing(section: &str, kind: ExperimentKind) -> Error {
    Error::Config(format!("experiment `{}` needs a [{section}] section", kind.name()))
}

pub(crate) fn check_times(name: &str, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config(format!("{name}: at least one snapshot time is required")));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::Config(format!("{name}: times must be finite, >= 0 and sorted")));
        }
        prev = t;
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative `output_dir` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.output_dir = parent.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    /// SHA-256 of the parsed config in canonical JSON form. Formatting and
    /// comments do not affect it; any change of value does. The thread count
    /// and output location are excluded.
    pub fn canonical_hash(&self) -> String {
        let mut canon = self.clone();
        canon.threads = None;
        canon.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s = Vec::new();
        if let Some(p) = &self.particles {
            s.push(p.seed);
        }
        let q = |q: &Quantization, s: &mut Vec<u64>| {
            if let Quantization::Sample { seed, .. } = q {
                s.push(*seed);
            }
        };
        let sv = |v: &Solver, s: &mut Vec<u64>| {
            if let Solver::Sliced { seed, .. } | Solver::Auto { seed, .. } = v {
                s.push(*seed);
            }
        };
        if let Some(c) = &self.compare {
            q(&c.quantization, &mut s);
            sv(&c.solver, &mut s);
            s.push(c.sliced_seed);
        }
        if let Some(r) = &self.rate_study {
            q(&r.quantization, &mut s);
            sv(&r.solver, &mut s);
        }
        s
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().ok_or_else(|| missing("model", self.experiment))
    }

    pub fn particles(&self) -> Result<&ParticlesSection> {
        self.particles.as_ref().ok_or_else(|| missing("particles", self.experiment))
    }

    pub fn integrator(&self) -> Result<&IntegratorConfig> {
        self.integrator.as_ref().ok_or_else(|| missing("integrator", self.experiment))
    }

    pub fn phase_grid(&self) -> Result<&PhaseGrid> {
        self.phase_grid.as_ref().ok_or_else(|| missing("phase_grid", self.experiment))
    }

    pub fn vlasov(&self) -> Result<&VlasovSection> {
        self.vlasov.as_ref().ok_or_else(|| missing("vlasov", self.experiment))
    }

    pub fn hydro(&self) -> Result<&HydroSection> {
        self.hydro.as_ref().ok_or_else(|| missing("hydro", self.experiment))
    }

    pub fn hydro_grid(&self) -> Result<HydroGrid> {
        let h = self.hydro()?;
        match (&h.grid, &self.phase_grid) {
            (Some(g), None) => Ok(g.clone()),
            (None, Some(p)) => Ok(HydroGrid::of_phase(p)),
            (Some(g), Some(p)) => {
                if *g != HydroGrid::of_phase(p) {
                    return Err(Error::Config("[hydro.grid] must match the x-part of [phase_grid]".into()));
                }
                Ok(g.clone())
            }
            (None, None) => Err(missing("hydro.grid", self.experiment)),
        }
    }

    /// Checks that every section the experiment uses is present and valid.
    pub fn validate(&self) -> Result<()> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        use ExperimentKind::*;
        let k = self.experiment;
        if matches!(k, Particles | ComparePv | RateStudy) {
            let p = self.particles()?;
            let model = self.model()?;
            let count = match k {
                RateStudy => 1,
                _ => p.count.ok_or_else(|| Error::Config("[particles] needs `count`".into()))?,
            };
            let plan = p.plan(count)?;
            model.validate(plan.dim)?;
            self.integrator()?.validate(model, plan.dim)?;
            if model.chemistry().is_some() && plan.chem.is_none() {
                return Err(Error::Config("a chemotaxis model needs [particles.chemical]".into()));
            }
            if k != RateStudy {
                check_times("particles.snapshot_times_time", &p.snapshot_times)?;
            }
        }
        if matches!(k, Vlasov | ComparePv | CompareVe | RateStudy | EpsSweep) {
            let g = self.phase_grid()?;
            g.validate()?;
            let model = self.model()?;
            model.validate(1)?;
            let v = self.vlasov()?;
            positive("vlasov.dt_time", v.dt)?;
            if k != RateStudy {
                check_times("vlasov.snapshot_times_time", &v.snapshot_times)?;
            }
            match &v.initial {
                VlasovInitial::ParticleLaw => {
                    if self.particles.is_none() {
                        return Err(Error::Config("vlasov.initial = particle_law needs [particles]".into()));
                    }
                }
                VlasovInitial::Law { law } => law.validate()?,
                VlasovInitial::Monokinetic { density, velocity, sigma_v } => {
                    density.validate_density(&g.xs())?;
                    velocity.validate()?;
                    positive("sigma_v", *sigma_v)?;
                }
            }
            if matches!(k, CompareVe | EpsSweep) && !matches!(v.initial, VlasovInitial::Monokinetic { .. }) {
                return Err(Error::Config("comparing with Euler needs monokinetic Vlasov data".into()));
            }
        }
        if matches!(k, Euler | CompareVe | EpsSweep) {
            let h = self.hydro()?;
            let grid = self.hydro_grid()?;
            grid.validate()?;
            self.model()?.validate(1)?;
            positive("hydro.dt_time", h.dt)?;
            if k == Euler {
                check_times("hydro.snapshot_times_time", &h.snapshot_times)?;
                let init = h.initial.as_ref().ok_or_else(|| Error::Config("[hydro.initial] is required".into()))?;
                init.density.validate_density(&grid.xs())?;
                init.velocity.validate()?;
            }
        }
        if k == KellerSegel {
            let s = self.keller_segel.as_ref().ok_or_else(|| missing("keller_segel", k))?;
            s.params.validate()?;
            s.grid.validate()?;
            positive("keller_segel.dt_time", s.dt)?;
            check_times("keller_segel.snapshot_times_time", &s.snapshot_times)?;
            s.initial_density.validate_density(&s.grid.xs())?;
        }
        if k == ComparePv {
            let c = self.compare.clone().unwrap_or_default();
            if c.orders.is_empty() || c.orders.iter().any(|j| *j != 1 && *j != 2) {
                return Err(Error::Config("compare.orders must be a non-empty list of 1 and 2".into()));
            }
            let p = self.particles()?;
            if p.dim != 1 {
                return Err(Error::Config("particle-Vlasov comparison runs in one dimension".into()));
            }
            if p.snapshot_times != self.vlasov()?.snapshot_times {
                return Err(Error::Config("particles and vlasov snapshot times must agree".into()));
            }
        }
        if k == RateStudy {
            let r = self.rate_study.as_ref().ok_or_else(|| missing("rate_study", k))?;
            if r.particle_counts.len() < crate::transport::MIN_RATE_POINTS {
                return Err(Error::Config(format!(
                    "rate_study.particle_counts needs at least {} entries",
                    crate::transport::MIN_RATE_POINTS
                )));
            }
            if r.particle_counts.contains(&0) {
                return Err(Error::Config("particle counts must be >= 1".into()));
            }
            if !(r.t.is_finite() && r.t > 0.0 && r.t <= self.integrator()?.t_final) {
                return Err(Error::Config("rate_study.t_time must lie in (0, integrator.t_final_time]".into()));
            }
            if self.particles()?.dim != 1 {
                return Err(Error::Config("the rate study compares against the 1D Vlasov solver".into()));
            }
        }
        if k == EpsSweep {
            let e = self.eps_sweep.as_ref().ok_or_else(|| missing("eps_sweep", k))?;
            if e.pressures.is_empty() || e.pressures.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Config("eps_sweep.pressures must be a non-empty list of finite values >= 0".into()));
            }
        }
        if k == KsLimit {
            let s = self.ks_limit.as_ref().ok_or_else(|| missing("ks_limit", k))?;
            if s.eps_values.is_empty() || s.eps_values.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err(Error::Config("ks_limit.eps_values must be a non-empty list of positive values".into()));
            }
            s.grid.validate()?;
            positive("ks_limit.dt_time", s.dt)?;
            positive("ks_limit.t_final_time", s.t_final)?;
            s.initial_density.validate_density(&s.grid.xs())?;
            crate::hydro::KellerSegel { eta: s.eta, kappa: s.kappa, diffusivity: s.diffusivity, drift: Default::default() }
                .validate()?;
        }
        Ok(())
    }
}
