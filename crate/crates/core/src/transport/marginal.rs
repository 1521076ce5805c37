use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sliced_w2, wasserstein, DiscreteMeasure, Distance, Solver, DEFAULT_DIRECTIONS};
use crate::error::{Error, Result};
use crate::kinetic::PhaseDensity;
use crate::model::ModelKind;
use crate::particles::ReplicaRun;

/// Pools the first `j` particles of every replica at one snapshot into an
/// equal-weight measure on `ℝ^{2dj}`, laid out as `(x_1..x_j, v_1..v_j)`.
pub fn extract_marginal(run: &ReplicaRun, snapshot: usize, j: usize, kind: ModelKind) -> Result<DiscreteMeasure> {
    if kind == ModelKind::MultiAgent {
        return Err(Error::Unsupported(
            "multi-agent particles are not exchangeable; pass explicit indices to extract_marginal_indexed".into(),
        ));
    }
    if j == 0 || j > run.particles {
        return Err(Error::invalid("j", format!("must lie in 1..={}, got {j}", run.particles)));
    }
    let indices: Vec<usize> = (0..j).collect();
    extract_marginal_indexed(run, snapshot, &indices)
}

/// Marginal on an explicit list of particle indices.
pub fn extract_marginal_indexed(run: &ReplicaRun, snapshot: usize, indices: &[usize]) -> Result<DiscreteMeasure> {
    let snap = run
        .snapshots
        .get(snapshot)
        .ok_or(Error::IndexOutOfRange { index: snapshot, len: run.snapshots.len() })?;
    if indices.is_empty() {
        return Err(Error::invalid("indices", "must not be empty"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= run.particles) {
        return Err(Error::IndexOutOfRange { index: bad, len: run.particles });
    }
    let d = run.dim;
    let m = 2 * d * indices.len();
    let mut points = Vec::with_capacity(m * snap.states.len());
    for s in &snap.states {
        for &i in indices {
            points.extend_from_slice(&s.positions[i * d..(i + 1) * d]);
        }
        for &i in indices {
            points.extend_from_slice(&s.velocities[i * d..(i + 1) * d]);
        }
    }
    DiscreteMeasure::uniform(m, points)
}

/// How a grid density is turned into atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quantization {
    /// One atom per `block × block` group of cells, at the group's centre of
    /// mass, carrying the group's mass. `block = 1` gives cell centres.
    Grid { block: usize },
    /// `atoms` i.i.d. draws from the piecewise-constant density.
    Sample { atoms: usize, seed: u64 },
}

impl Default for Quantization {
    fn default() -> Self {
        Quantization::Grid { block: 1 }
    }
}

/// Discretizes a phase density into a measure on `ℝ²` with points `(x, v)`.
pub fn vlasov_reference_measure(rho: &PhaseDensity, q: Quantization) -> Result<DiscreteMeasure> {
    rho.validate()?;
    let g = &rho.grid;
    let area = g.cell_area();
    let total: f64 = rho.values.iter().sum::<f64>() * area;
    match q {
        Quantization::Grid { block } => {
            if block == 0 {
                return Err(Error::invalid("block", "must be >= 1"));
            }
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for bi in (0..g.nx).step_by(block) {
                for bj in (0..g.nv).step_by(block) {
                    let (mut w, mut sx, mut sv) = (0.0, 0.0, 0.0);
                    for i in bi..(bi + block).min(g.nx) {
                        for j in bj..(bj + block).min(g.nv) {
                            let c = rho.at(i, j) * area / total;
                            w += c;
                            sx += c * g.x(i);
                            sv += c * g.v(j);
                        }
                    }
                    if w > 0.0 {
                        points.extend_from_slice(&[sx / w, sv / w]);
                        weights.push(w);
                    }
                }
            }
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            DiscreteMeasure::new(2, points, weights)
        }
        Quantization::Sample { atoms, seed } => {
            if atoms == 0 {
                return Err(Error::invalid("atoms", "must be >= 1"));
            }
            let mut cdf = Vec::with_capacity(rho.values.len());
            let mut acc = 0.0;
            for v in &rho.values {
                acc += v * area / total;
                cdf.push(acc);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut points = Vec::with_capacity(2 * atoms);
            for _ in 0..atoms {
                let u: f64 = rng.random::<f64>() * acc;
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                let (i, j) = (k / g.nv, k % g.nv);
                let jx: f64 = rng.random::<f64>() - 0.5;
                let jv: f64 = rng.random::<f64>() - 0.5;
                points.push(g.x(i) + jx * g.dx());
                points.push(g.v(j) + jv * g.dv());
            }
            DiscreteMeasure::uniform(2, points)
        }
    }
}

/// `j`-fold product of a one-particle measure whose points are `(x, v)` with
/// `d` coordinates each, laid out like [`extract_marginal`].
pub fn product_measure(a: &DiscreteMeasure, j: usize) -> Result<DiscreteMeasure> {
    if a.dim % 2 != 0 {
        return Err(Error::invalid("measure", "points must be (x, v) pairs"));
    }
    let d = a.dim / 2;
    let a = a.support();
    match j {
        1 => Ok(a),
        2 => {
            let k = a.len();
            let mut points = Vec::with_capacity(k * k * 4 * d);
            let mut weights = Vec::with_capacity(k * k);
            for p in 0..k {
                let (xp, vp) = a.point(p).split_at(d);
                for q in 0..k {
                    let (xq, vq) = a.point(q).split_at(d);
                    points.extend_from_slice(xp);
                    points.extend_from_slice(xq);
                    points.extend_from_slice(vp);
                    points.extend_from_slice(vq);
                    weights.push(a.weights[p] * a.weights[q]);
                }
            }
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            DiscreteMeasure::new(4 * d, points, weights)
        }
        _ => Err(Error::invalid("j", "products are built for j in {1, 2}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosOptions {
    pub quantization: Quantization,
    /// Solver for `j = 1`.
    pub solver: Solver,
    /// Directions and seed of the sliced estimator used for `j = 2`.
    pub directions: usize,
    pub seed: u64,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        Self {
            quantization: Quantization::default(),
            solver: Solver::Auto { directions: DEFAULT_DIRECTIONS, seed: 0 },
            directions: DEFAULT_DIRECTIONS,
            seed: 0,
        }
    }
}

/// `W2` between the `j`-particle marginal of a replica run and the `j`-fold
/// product of a quantized reference density.
pub fn chaos_error(
    run: &ReplicaRun,
    snapshot: usize,
    rho_ref: &PhaseDensity,
    j: usize,
    kind: ModelKind,
    opts: &ChaosOptions,
) -> Result<Distance> {
    if run.dim != 1 {
        return Err(Error::DimensionMismatch { left: run.dim, right: 1 });
    }
    if j != 1 && j != 2 {
        return Err(Error::invalid("j", "must be 1 or 2"));
    }
    let marginal = extract_marginal(run, snapshot, j, kind)?;
    let reference = product_measure(&vlasov_reference_measure(rho_ref, opts.quantization)?, j)?;
    if j == 1 {
        wasserstein(&marginal, &reference, 2, opts.solver)
    } else {
        sliced_w2(&marginal, &reference, opts.directions, opts.seed)
    }
}
