use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{advance, IntegratorConfig, Workspace};
use crate::error::{Error, Result};
use crate::model::{ChemicalField, Domain, ModelSpec, ParticleEnsemble};

/// One-particle initial law `ρ⁰`, sampled independently for every particle.
/// Each law is a product over coordinates except for the shared cluster
/// label of the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Gaussian {
        #[serde(rename = "position_mean_length", default)]
        position_mean: f64,
        #[serde(rename = "position_std_length")]
        position_std: f64,
        #[serde(default)]
        velocity_mean: f64,
        velocity_std: f64,
    },
    UniformBox {
        #[serde(rename = "position_lo_length")]
        position_lo: f64,
        #[serde(rename = "position_hi_length")]
        position_hi: f64,
        velocity_lo: f64,
        velocity_hi: f64,
    },
    /// Equal-weight mixture of Gaussians centred at `±offset` on every
    /// position coordinate, with cluster velocities `∓velocity_offset`.
    TwoCluster {
        #[serde(rename = "offset_length")]
        offset: f64,
        #[serde(rename = "position_std_length")]
        position_std: f64,
        #[serde(default)]
        velocity_offset: f64,
        velocity_std: f64,
    },
}

const CLUSTER_SLOT: u64 = 7;

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite"))
            }
        };
        match *self {
            InitialLaw::Gaussian { position_mean, position_std, velocity_mean, velocity_std } => {
                finite("position_mean_length", position_mean)?;
                finite("velocity_mean", velocity_mean)?;
                crate::model::kernels::finite_nonneg("position_std_length", position_std)?;
                crate::model::kernels::finite_nonneg("velocity_std", velocity_std)
            }
            InitialLaw::UniformBox { position_lo, position_hi, velocity_lo, velocity_hi } => {
                finite("position_lo_length", position_lo)?;
                finite("position_hi_length", position_hi)?;
                finite("velocity_lo", velocity_lo)?;
                finite("velocity_hi", velocity_hi)?;
                if position_hi < position_lo || velocity_hi < velocity_lo {
                    return Err(Error::invalid("uniform_box", "upper bound below lower bound"));
                }
                Ok(())
            }
            InitialLaw::TwoCluster { offset, position_std, velocity_offset, velocity_std } => {
                finite("offset_length", offset)?;
                finite("velocity_offset", velocity_offset)?;
                crate::model::kernels::finite_nonneg("position_std_length", position_std)?;
                crate::model::kernels::finite_nonneg("velocity_std", velocity_std)
            }
        }
    }

    /// Draws one particle: `x` and `v` each have length `dim`.
    pub fn sample(&self, seed: u64, replica: u64, particle: u64, x: &mut [f64], v: &mut [f64]) {
        let dim = x.len() as u64;
        let normal = |slot: u64| -> f64 { particle_rng(seed, replica, particle, slot).sample(StandardNormal) };
        let uniform = |slot: u64| -> f64 { particle_rng(seed, replica, particle, slot).random::<f64>() };
        match *self {
            InitialLaw::Gaussian { position_mean, position_std, velocity_mean, velocity_std } => {
                for a in 0..dim {
                    x[a as usize] = position_mean + position_std * normal(a);
                    v[a as usize] = velocity_mean + velocity_std * normal(dim + a);
                }
            }
            InitialLaw::UniformBox { position_lo, position_hi, velocity_lo, velocity_hi } => {
                for a in 0..dim {
                    x[a as usize] = position_lo + (position_hi - position_lo) * uniform(a);
                    v[a as usize] = velocity_lo + (velocity_hi - velocity_lo) * uniform(dim + a);
                }
            }
            InitialLaw::TwoCluster { offset, position_std, velocity_offset, velocity_std } => {
                let s = if uniform(CLUSTER_SLOT) < 0.5 { 1.0 } else { -1.0 };
                for a in 0..dim {
                    x[a as usize] = s * offset + position_std * normal(a);
                    v[a as usize] = -s * velocity_offset + velocity_std * normal(dim + a);
                }
            }
        }
    }

    /// Joint density of one particle at `(x, v)`.
    pub fn density(&self, x: &[f64], v: &[f64]) -> f64 {
        let gauss = |z: f64, m: f64, s: f64| {
            let u = (z - m) / s;
            (-0.5 * u * u).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let boxed = |z: f64, lo: f64, hi: f64| if z >= lo && z < hi { 1.0 / (hi - lo) } else { 0.0 };
        match *self {
            InitialLaw::Gaussian { position_mean, position_std, velocity_mean, velocity_std } => {
                x.iter().map(|&z| gauss(z, position_mean, position_std)).product::<f64>()
                    * v.iter().map(|&z| gauss(z, velocity_mean, velocity_std)).product::<f64>()
            }
            InitialLaw::UniformBox { position_lo, position_hi, velocity_lo, velocity_hi } => {
                x.iter().map(|&z| boxed(z, position_lo, position_hi)).product::<f64>()
                    * v.iter().map(|&z| boxed(z, velocity_lo, velocity_hi)).product::<f64>()
            }
            InitialLaw::TwoCluster { offset, position_std, velocity_offset, velocity_std } => {
                let branch = |s: f64| {
                    x.iter().map(|&z| gauss(z, s * offset, position_std)).product::<f64>()
                        * v.iter().map(|&z| gauss(z, -s * velocity_offset, velocity_std)).product::<f64>()
                };
                0.5 * (branch(1.0) + branch(-1.0))
            }
        }
    }
}

/// Generator for one `(seed, replica, particle, slot)` key. Slots `0..d`
/// are position coordinates, `d..2d` velocity coordinates.
pub fn particle_rng(seed: u64, replica: u64, particle: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    // 2^36 words per particle and slot leave ample room for rejection sampling
    rng.set_word_pos(((particle as u128) << 3 | slot as u128) << 36);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPlan {
    pub replicas: usize,
    pub seed: u64,
    pub particles: usize,
    pub dim: usize,
    pub mass: f64,
    pub initial_law: InitialLaw,
    pub domain: Domain,
    /// Initial chemical field, copied into every replica.
    pub chem: Option<ChemicalField>,
}

impl ReplicaPlan {
    pub fn new(replicas: usize, seed: u64, particles: usize, dim: usize, initial_law: InitialLaw) -> Self {
        Self { replicas, seed, particles, dim, mass: 1.0, initial_law, domain: Domain::Free, chem: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::invalid("replicas", "must be >= 1"));
        }
        if self.particles == 0 {
            return Err(Error::invalid("particles", "must be >= 1"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", "must be finite and > 0"));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid("dim", "must be 1, 2 or 3"));
        }
        self.domain.validate(self.dim)?;
        self.initial_law.validate()
    }
}

/// Samples the initial ensemble of one replica. Particle `i` depends only on
/// `(seed, replica, i)`, so ensembles of different sizes are nested.
pub fn sample_initial(plan: &ReplicaPlan, replica: usize) -> Result<ParticleEnsemble> {
    let (n, d) = (plan.particles, plan.dim);
    let mut x = vec![0.0; n * d];
    let mut v = vec![0.0; n * d];
    for i in 0..n {
        plan.initial_law.sample(
            plan.seed,
            replica as u64,
            i as u64,
            &mut x[i * d..(i + 1) * d],
            &mut v[i * d..(i + 1) * d],
        );
    }
    plan.domain.wrap(&mut x, d);
    let mut ens = ParticleEnsemble::new(d, x, v, vec![plan.mass; n])?.with_domain(plan.domain.clone())?;
    if let Some(field) = &plan.chem {
        ens = ens.with_chem(field.clone())?;
    }
    Ok(ens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// One state per replica, in replica order.
    pub states: Vec<ReplicaState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub dim: usize,
    pub particles: usize,
    pub snapshots: Vec<Snapshot>,
}

/// Runs every replica up to each snapshot time. Between consecutive
/// snapshots the interval is split into equal steps no longer than `cfg.dt`.
pub fn run_replicas(
    plan: &ReplicaPlan,
    model: &ModelSpec,
    cfg: &IntegratorConfig,
    times: &[f64],
) -> Result<ReplicaRun> {
    plan.validate()?;
    model.validate(plan.dim)?;
    cfg.validate(model, plan.dim)?;
    if model.chemistry().is_some() && plan.chem.is_none() {
        return Err(Error::MissingChemicalField);
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t <= cfg.t_final) {
            return Err(Error::invalid(
                "snapshot_times",
                format!("must be sorted within [0, {}], got {t}", cfg.t_final),
            ));
        }
        prev = t;
    }

    let results: Vec<Result<Vec<ReplicaState>>> = (0..plan.replicas)
        .into_par_iter()
        .map(|r| {
            run_one(plan, model, cfg, times, r).map_err(|e| Error::Replica { replica: r, source: Box::new(e) })
        })
        .collect();

    let mut snapshots: Vec<Snapshot> =
        times.iter().map(|&t| Snapshot { t, states: Vec::with_capacity(plan.replicas) }).collect();
    for res in results {
        for (snap, state) in snapshots.iter_mut().zip(res?) {
            snap.states.push(state);
        }
    }
    Ok(ReplicaRun { dim: plan.dim, particles: plan.particles, snapshots })
}

fn run_one(
    plan: &ReplicaPlan,
    model: &ModelSpec,
    cfg: &IntegratorConfig,
    times: &[f64],
    replica: usize,
) -> Result<Vec<ReplicaState>> {
    let mut ens = sample_initial(plan, replica)?;
    let mut work = Workspace::new(ens.positions.len());
    let mut t = 0.0;
    let mut step = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let k = (span / cfg.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / k as f64;
            for _ in 0..k {
                advance(&mut ens, model, cfg, h, step, &mut work)?;
                step += 1;
            }
        }
        t = target;
        out.push(ReplicaState { positions: ens.positions.clone(), velocities: ens.velocities.clone() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairPotential, Sign};
    use crate::particles::IntegratorConfig;

    fn free_model() -> ModelSpec {
        ModelSpec::two_body(PairPotential::Harmonic { stiffness: 0.0 }, Sign::Minus)
    }

    fn gaussian() -> InitialLaw {
        InitialLaw::Gaussian { position_mean: 0.5, position_std: 1.0, velocity_mean: -1.0, velocity_std: 0.5 }
    }

    #[test]
    fn zero_time_returns_initial_sample() {
        let plan = ReplicaPlan::new(1, 7, 5, 2, gaussian());
        let run = run_replicas(&plan, &free_model(), &IntegratorConfig::rk4(0.1, 0.0), &[0.0]).unwrap();
        let init = sample_initial(&plan, 0).unwrap();
        assert_eq!(run.snapshots[0].states[0].positions, init.positions);
        assert_eq!(run.snapshots[0].states[0].velocities, init.velocities);
    }

    #[test]
    fn nested_sizes_share_particles() {
        let small = sample_initial(&ReplicaPlan::new(3, 11, 4, 1, gaussian()), 2).unwrap();
        let large = sample_initial(&ReplicaPlan::new(3, 11, 9, 1, gaussian()), 2).unwrap();
        assert_eq!(small.positions[..], large.positions[..4]);
        let other = sample_initial(&ReplicaPlan::new(3, 11, 4, 1, gaussian()), 1).unwrap();
        assert_ne!(small.positions, other.positions);
    }

    #[test]
    fn snapshot_times_outside_horizon_are_rejected() {
        let plan = ReplicaPlan::new(1, 7, 2, 1, gaussian());
        let cfg = IntegratorConfig::rk4(0.1, 1.0);
        assert!(run_replicas(&plan, &free_model(), &cfg, &[0.5, 2.0]).is_err());
        assert!(run_replicas(&plan, &free_model(), &cfg, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn two_cluster_density_integrates_to_one() {
        let law = InitialLaw::TwoCluster { offset: 1.0, position_std: 0.3, velocity_offset: 0.5, velocity_std: 0.2 };
        let h = 0.01;
        let mut total = 0.0;
        for i in 0..800 {
            for j in 0..400 {
                let x = -4.0 + (i as f64 + 0.5) * h;
                let v = -2.0 + (j as f64 + 0.5) * h;
                total += law.density(&[x], &[v]) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_box_samples_stay_inside() {
        let law = InitialLaw::UniformBox { position_lo: -1.0, position_hi: 2.0, velocity_lo: 0.0, velocity_hi: 0.5 };
        let ens = sample_initial(&ReplicaPlan::new(1, 3, 500, 2, law), 0).unwrap();
        assert!(ens.positions.iter().all(|&x| (-1.0..2.0).contains(&x)));
        assert!(ens.velocities.iter().all(|&v| (0.0..0.5).contains(&v)));
    }
}
