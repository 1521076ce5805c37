use serde::{Deserialize, Serialize};

use super::kernels::RaisedCosine;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    HomogeneousNeumann,
}

/// Cell-centred regular lattice over a box, in one or two dimensions.
///
/// Node `k` along axis `a` sits at `lo[a] + (k + 1/2) h[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
    pub boundary: Boundary,
}

impl FieldGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, nodes: Vec<usize>, boundary: Boundary) -> Result<Self> {
        let g = Self { lo, hi, nodes, boundary };
        g.validate()?;
        Ok(g)
    }

    pub fn line(lo: f64, hi: f64, n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![n], boundary)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.nodes.len();
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported(format!("chemical grids support d = 1 or 2, got {d}")));
        }
        if self.lo.len() != d || self.hi.len() != d {
            return Err(Error::DimensionMismatch { left: self.lo.len(), right: d });
        }
        for a in 0..d {
            if self.nodes[a] < 3 {
                return Err(Error::invalid("n_nodes", "need at least 3 nodes per axis"));
            }
            if !(self.lo[a].is_finite() && self.hi[a].is_finite() && self.hi[a] > self.lo[a]) {
                return Err(Error::invalid("box", "empty or non-finite field box"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.nodes[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + (k as f64 + 0.5) * self.spacing(axis)
    }

    /// Position of the node with flat index `idx`.
    pub fn node_position(&self, idx: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.coord(0, idx)],
            _ => {
                let n1 = self.nodes[1];
                vec![self.coord(0, idx / n1), self.coord(1, idx % n1)]
            }
        }
    }

    #[inline]
    fn flat(&self, idx: &[usize]) -> usize {
        match idx.len() {
            1 => idx[0],
            _ => idx[0] * self.nodes[1] + idx[1],
        }
    }

    /// Index of the neighbour of node `k` shifted by `step` along an axis,
    /// resolving the boundary rule. Neumann walls mirror onto the edge node.
    #[inline]
    fn neighbour(&self, axis: usize, k: usize, step: isize) -> usize {
        let n = self.nodes[axis] as isize;
        let j = k as isize + step;
        match self.boundary {
            Boundary::Periodic => j.rem_euclid(n) as usize,
            Boundary::HomogeneousNeumann => j.clamp(0, n - 1) as usize,
        }
    }

    /// Brings `x` into the box, or fails if it lies outside a walled box.
    fn locate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { left: x.len(), right: self.dim() });
        }
        let mut y = x.to_vec();
        for a in 0..self.dim() {
            if !y[a].is_finite() {
                return Err(Error::NonFinite { what: "query position", step: 0 });
            }
            let (lo, hi) = (self.lo[a], self.hi[a]);
            match self.boundary {
                Boundary::Periodic => {
                    let len = hi - lo;
                    y[a] = lo + (y[a] - lo).rem_euclid(len);
                }
                Boundary::HomogeneousNeumann => {
                    if y[a] < lo || y[a] > hi {
                        return Err(Error::OutsideBox { coordinate: y[a], lo, hi });
                    }
                }
            }
        }
        Ok(y)
    }

    /// Multilinear interpolation stencil: per axis the two bracketing nodes
    /// and the weight of the upper one.
    fn stencil(&self, y: &[f64]) -> Vec<(usize, usize, f64)> {
        (0..self.dim())
            .map(|a| {
                let n = self.nodes[a];
                let s = (y[a] - self.lo[a]) / self.spacing(a) - 0.5;
                let base = s.floor();
                let frac = s - base;
                match self.boundary {
                    Boundary::Periodic => {
                        let k0 = (base as isize).rem_euclid(n as isize) as usize;
                        (k0, (k0 + 1) % n, frac)
                    }
                    Boundary::HomogeneousNeumann => {
                        if s <= 0.0 {
                            (0, 0, 0.0)
                        } else if s >= (n - 1) as f64 {
                            (n - 1, n - 1, 0.0)
                        } else {
                            let k0 = base as usize;
                            (k0, k0 + 1, frac)
                        }
                    }
                }
            })
            .collect()
    }
}

/// Chemical concentration sampled on a [`FieldGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemicalField {
    pub grid: FieldGrid,
    pub values: Vec<f64>,
}

impl ChemicalField {
    pub fn zeros(grid: FieldGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: FieldGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.node_position(k))).collect();
        Self { grid, values }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { left: self.values.len(), right: self.grid.len() });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "chemical field", step: 0 });
        }
        Ok(())
    }

    /// Central-difference gradient at a node.
    fn nodal_gradient(&self, idx: &[usize], out: &mut [f64]) {
        let g = &self.grid;
        for a in 0..g.dim() {
            let mut up = idx.to_vec();
            let mut down = idx.to_vec();
            up[a] = g.neighbour(a, idx[a], 1);
            down[a] = g.neighbour(a, idx[a], -1);
            out[a] = (self.values[g.flat(&up)] - self.values[g.flat(&down)]) / (2.0 * g.spacing(a));
        }
    }

    /// Gradient of the interpolated field at `x`: nodal central differences,
    /// blended multilinearly.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = &self.grid;
        let y = g.locate(x)?;
        let st = g.stencil(&y);
        let d = g.dim();
        let mut out = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = vec![0usize; d];
            for a in 0..d {
                let (k0, k1, f) = st[a];
                if corner >> a & 1 == 1 {
                    idx[a] = k1;
                    w *= f;
                } else {
                    idx[a] = k0;
                    w *= 1.0 - f;
                }
            }
            if w == 0.0 {
                continue;
            }
            self.nodal_gradient(&idx, &mut tmp);
            for a in 0..d {
                out[a] += w * tmp[a];
            }
        }
        Ok(out)
    }

    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let y = g.locate(x)?;
        let st = g.stencil(&y);
        let d = g.dim();
        let mut v = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = vec![0usize; d];
            for a in 0..d {
                let (k0, k1, f) = st[a];
                if corner >> a & 1 == 1 {
                    idx[a] = k1;
                    w *= f;
                } else {
                    idx[a] = k0;
                    w *= 1.0 - f;
                }
            }
            v += w * self.values[g.flat(&idx)];
        }
        Ok(v)
    }

    /// Discrete Laplacian with the grid's boundary rule.
    pub fn laplacian(&self, out: &mut [f64]) {
        let g = &self.grid;
        match g.dim() {
            1 => {
                let n = g.nodes[0];
                let h2 = g.spacing(0).powi(2);
                for k in 0..n {
                    let l = self.values[g.neighbour(0, k, -1)];
                    let r = self.values[g.neighbour(0, k, 1)];
                    out[k] = (l - 2.0 * self.values[k] + r) / h2;
                }
            }
            _ => {
                let (n0, n1) = (g.nodes[0], g.nodes[1]);
                let (h0, h1) = (g.spacing(0).powi(2), g.spacing(1).powi(2));
                for i in 0..n0 {
                    let (im, ip) = (g.neighbour(0, i, -1), g.neighbour(0, i, 1));
                    for j in 0..n1 {
                        let (jm, jp) = (g.neighbour(1, j, -1), g.neighbour(1, j, 1));
                        let c = self.values[i * n1 + j];
                        out[i * n1 + j] = (self.values[im * n1 + j] - 2.0 * c + self.values[ip * n1 + j]) / h0
                            + (self.values[i * n1 + jm] - 2.0 * c + self.values[i * n1 + jp]) / h1;
                    }
                }
            }
        }
    }

    /// Adds `weight * Σ_j χ(node - x_j)` to `out` for every node in reach.
    pub fn deposit(&self, chi: &RaisedCosine, positions: &[f64], weight: f64, out: &mut [f64]) {
        deposit_sources(&self.grid, chi, positions, weight, out)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Splats mollified point sources onto the nodes of `grid`.
pub fn deposit_sources(grid: &FieldGrid, chi: &RaisedCosine, positions: &[f64], weight: f64, out: &mut [f64]) {
    let d = grid.dim();
    let r = chi.radius;
    let periodic = grid.boundary == Boundary::Periodic;
    for p in positions.chunks(d) {
        // node index range per axis that can lie within the radius
        let ranges: Vec<(isize, isize)> = (0..d)
            .map(|a| {
                let h = grid.spacing(a);
                let lo = ((p[a] - r - grid.lo[a]) / h - 0.5).ceil() as isize;
                let hi = ((p[a] + r - grid.lo[a]) / h - 0.5).floor() as isize;
                (lo, hi)
            })
            .collect();
        let resolve = |a: usize, k: isize| -> Option<usize> {
            let n = grid.nodes[a] as isize;
            if periodic {
                Some(k.rem_euclid(n) as usize)
            } else if (0..n).contains(&k) {
                Some(k as usize)
            } else {
                None
            }
        };
        match d {
            1 => {
                for k in ranges[0].0..=ranges[0].1 {
                    let Some(i) = resolve(0, k) else { continue };
                    let dx = grid.lo[0] + (k as f64 + 0.5) * grid.spacing(0) - p[0];
                    out[i] += weight * chi.eval(dx * dx, 1);
                }
            }
            _ => {
                let n1 = grid.nodes[1];
                for k0 in ranges[0].0..=ranges[0].1 {
                    let Some(i) = resolve(0, k0) else { continue };
                    let dx = grid.lo[0] + (k0 as f64 + 0.5) * grid.spacing(0) - p[0];
                    for k1 in ranges[1].0..=ranges[1].1 {
                        let Some(j) = resolve(1, k1) else { continue };
                        let dy = grid.lo[1] + (k1 as f64 + 0.5) * grid.spacing(1) - p[1];
                        out[i * n1 + j] += weight * chi.eval(dx * dx + dy * dy, 2);
                    }
                }
            }
        }
    }
}
