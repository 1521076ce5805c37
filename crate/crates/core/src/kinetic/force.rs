use super::{moments, KernelRange, PhaseDensity, PhaseGrid};
use crate::error::{Error, Result};
use crate::model::{ChemicalField, Chemotaxis, CuckerSmale, Interaction, ModelSpec, PairLaw, PairPotential, Sign};

/// Uniform periodic x-cells on which interaction integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cells {
    pub nx: usize,
    pub x_min: f64,
    pub dx: f64,
    pub range: KernelRange,
}

impl Cells {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Interaction distance between cells `i` and `k`, exact in the
    /// integer offset so mirror pairs tie exactly.
    pub fn distance(&self, i: usize, k: usize) -> f64 {
        let o = i.abs_diff(k);
        let o = match self.range {
            KernelRange::MinimumImage => o.min(self.nx - o),
            KernelRange::Direct => o,
        };
        o as f64 * self.dx
    }

    /// Signed displacement `x_i - x_k`; on the periodic box the half-box
    /// offset is ambiguous and reported as `None`.
    pub fn offset(&self, i: usize, k: usize) -> Option<f64> {
        let o = i as isize - k as isize;
        let o = match self.range {
            KernelRange::Direct => o,
            KernelRange::MinimumImage => {
                let n = self.nx as isize;
                let w = o.rem_euclid(n);
                if 2 * w == n {
                    return None;
                }
                if 2 * w > n {
                    w - n
                } else {
                    w
                }
            }
        };
        Some(o as f64 * self.dx)
    }
}

/// Self-consistent force on the x-cells, affine in velocity:
/// `F(x_i, v) = slope[i] · v + offset[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    pub slope: Vec<f64>,
    pub offset: Vec<f64>,
}

impl ForceField {
    fn zeros(n: usize) -> Self {
        Self { slope: vec![0.0; n], offset: vec![0.0; n] }
    }

    #[inline]
    pub fn at(&self, i: usize, v: f64) -> f64 {
        self.slope[i] * v + self.offset[i]
    }

    /// Force on every phase node, x-major.
    pub fn nodal(&self, grid: &PhaseGrid) -> Vec<f64> {
        let vs = grid.vs();
        (0..grid.nx).flat_map(|i| vs.iter().map(move |&v| self.at(i, v))).collect()
    }

    /// Largest `|F|` over the velocity cell centres.
    pub fn max_abs(&self, grid: &PhaseGrid) -> f64 {
        let (v0, v1) = (grid.v(0), grid.v(grid.nv - 1));
        (0..grid.nx).map(|i| self.at(i, v0).abs().max(self.at(i, v1).abs())).fold(0.0, f64::max)
    }
}

/// Midpoint-rule quadrature of the interaction against `ρ`, plus the
/// chemical gradient and external force for chemotaxis. Under the friction
/// variant the returned field is the rescaled-time acceleration `(F - v)/ε`.
pub fn vlasov_force_field(rho: &PhaseDensity, model: &ModelSpec, chem: Option<&ChemicalField>) -> Result<ForceField> {
    let m = moments(rho);
    let mut f = moment_force(&rho.grid.cells(), &m.mu, &m.momentum, &model.law, chem)?;
    if let Some(eps) = model.friction {
        for (s, o) in f.slope.iter_mut().zip(f.offset.iter_mut()) {
            *s = (*s - 1.0) / eps;
            *o /= eps;
        }
    }
    Ok(f)
}

/// Force from the density `mu` and momentum `q` on the cells, without the
/// friction term.
pub(crate) fn moment_force(
    g: &Cells,
    mu: &[f64],
    q: &[f64],
    law: &Interaction,
    chem: Option<&ChemicalField>,
) -> Result<ForceField> {
    let mut f = ForceField::zeros(g.nx);
    match law {
        Interaction::TwoBody { potential, sign } => two_body(g, mu, potential, *sign, &mut f),
        Interaction::CuckerSmale(cs) => alignment(g, mu, q, cs, &mut f),
        Interaction::Topological { weight, sign } => {
            let dx = g.dx;
            let mut order: Vec<usize> = Vec::with_capacity(g.nx);
            let mut rank = vec![0.0; g.nx];
            for i in 0..g.nx {
                // mass-rank of each cell seen from x_i, ties counted inside
                order.clear();
                order.extend(0..g.nx);
                order.sort_by(|&a, &b| g.distance(i, a).total_cmp(&g.distance(i, b)));
                let mut acc = 0.0;
                let mut start = 0;
                while start < order.len() {
                    let r = g.distance(i, order[start]);
                    let mut end = start;
                    while end < order.len() && g.distance(i, order[end]) == r {
                        acc += mu[order[end]] * dx;
                        end += 1;
                    }
                    for &k in &order[start..end] {
                        rank[k] = acc;
                    }
                    start = end;
                }
                let (mut a, mut b) = (0.0, 0.0);
                for k in 0..g.nx {
                    let w = weight.eval(rank[k]) * dx;
                    a += w * mu[k];
                    b += w * q[k];
                }
                f.slope[i] = sign.value() * a;
                f.offset[i] = -sign.value() * b;
            }
        }
        Interaction::Chemotaxis(c) => chemotaxis(g, mu, q, c, chem, &mut f)?,
        Interaction::MultiAgent(_) => {
            return Err(Error::Unsupported("multi-agent agents are not exchangeable; no kinetic limit".into()))
        }
    }
    Ok(f)
}

fn two_body(g: &Cells, mu: &[f64], potential: &PairPotential, sign: Sign, f: &mut ForceField) {
    let dx = g.dx;
    // ∇V(x_i - x_k) depends on the offset only
    let table: Vec<f64> = (0..2 * g.nx - 1)
        .map(|o| {
            let (i, k) = if o < g.nx { (o, 0) } else { (0, o - g.nx + 1) };
            g.offset(i, k).map_or(0.0, |z| potential.grad_factor(z * z, 1) * z)
        })
        .collect();
    for i in 0..g.nx {
        let mut acc = 0.0;
        for k in 0..g.nx {
            let o = if i >= k { i - k } else { g.nx - 1 + (k - i) };
            acc += table[o] * mu[k];
        }
        f.offset[i] += sign.value() * acc * dx;
    }
}

fn alignment(g: &Cells, mu: &[f64], q: &[f64], cs: &CuckerSmale, f: &mut ForceField) {
    let dx = g.dx;
    let s = cs.sign.value() * cs.coupling;
    let table: Vec<f64> = (0..g.nx)
        .map(|o| {
            let r = g.distance(o, 0);
            cs.weight(r * r)
        })
        .collect();
    for i in 0..g.nx {
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..g.nx {
            let w = match g.range {
                KernelRange::Direct => table[i.abs_diff(k)],
                KernelRange::MinimumImage => {
                    let o = i.abs_diff(k);
                    table[o.min(g.nx - o)]
                }
            } * dx;
            a += w * mu[k];
            b += w * q[k];
        }
        f.slope[i] += s * a;
        f.offset[i] -= s * b;
    }
}

fn chemotaxis(
    g: &Cells,
    mu: &[f64],
    q: &[f64],
    c: &Chemotaxis,
    chem: Option<&ChemicalField>,
    f: &mut ForceField,
) -> Result<()> {
    match &c.pair {
        PairLaw::None => {}
        PairLaw::TwoBody { potential, sign } => two_body(g, mu, potential, *sign, f),
        PairLaw::CuckerSmale(cs) => alignment(g, mu, q, cs, f),
    }
    let field = chem.ok_or(Error::MissingChemicalField)?;
    let mut ext = [0.0];
    for i in 0..g.nx {
        let x = [g.x(i)];
        f.offset[i] += c.eta * field.gradient(&x)?[0];
        if let Some(e) = &c.external {
            ext[0] = 0.0;
            e.add_to(&x, &mut ext);
            f.offset[i] += ext[0];
        }
    }
    Ok(())
}
