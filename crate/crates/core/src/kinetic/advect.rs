//! Conservative semi-Lagrangian remaps. New cell masses are differences of
//! the old primitive at departure points; the primitive is interpolated by
//! cubic Lagrange polynomials through four interface values.

use super::{ForceField, PhaseDensity};

/// Cubic Lagrange weights on the nodes `-2, -1, 0, 1` at `y`.
#[inline]
fn lagrange4(y: f64) -> [f64; 4] {
    [
        -y * (y + 1.0) * (y - 1.0) / 6.0,
        y * (y + 2.0) * (y - 1.0) / 2.0,
        -(y + 2.0) * (y + 1.0) * (y - 1.0) / 2.0,
        y * (y + 1.0) * (y + 2.0) / 6.0,
    ]
}

/// Periodic shift of one column of cell averages by `s` cells (any sign).
pub(crate) fn shift_periodic(col: &[f64], s: f64, out: &mut [f64]) {
    let n = col.len() as isize;
    let a = s.floor();
    let f = s - a;
    let a = a as isize;
    let at = |k: isize| col[k.rem_euclid(n) as usize];
    if f == 0.0 {
        for i in 0..n {
            out[i as usize] = at(i - a);
        }
        return;
    }
    let [l2, l1, _, l_1] = lagrange4(-f);
    // mass crossing the right interface of cell k during the fractional part
    let flux = |k: isize| (l2 + l1) * at(k) + l2 * at(k - 1) - l_1 * at(k + 1);
    for i in 0..n {
        let k = i - a;
        out[i as usize] = at(k) - (flux(k) - flux(k - 1));
    }
}

pub(crate) fn shift_x(rho: &mut PhaseDensity, dt: f64) {
    let g = rho.grid.clone();
    let (nx, nv) = (g.nx, g.nv);
    let mut col = vec![0.0; nx];
    let mut out = vec![0.0; nx];
    for j in 0..nv {
        let s = g.v(j) * dt / g.dx();
        for i in 0..nx {
            col[i] = rho.values[i * nv + j];
        }
        shift_periodic(&col, s, &mut out);
        for i in 0..nx {
            rho.values[i * nv + j] = out[i];
        }
    }
}

/// Primitive through interface values `p[0..=n]` (cell units), constant
/// outside the grid.
fn primitive_at(p: &[f64], y: f64) -> f64 {
    let n = p.len() - 1;
    if y <= 0.0 {
        return p[0];
    }
    if y >= n as f64 {
        return p[n];
    }
    let k = (y.floor() as usize).min(n - 1);
    let base = (k as isize - 1).clamp(0, n as isize - 3) as usize;
    // nodes base..base+3 mapped onto -2..1
    let w = lagrange4(y - (base + 2) as f64);
    w[0] * p[base] + w[1] * p[base + 1] + w[2] * p[base + 2] + w[3] * p[base + 3]
}

/// Remaps every x-row along `dv/dt = a_i v + b_i` for time `dt`. Returns
/// the mass that left through the velocity boundary.
pub(crate) fn remap_v(rho: &mut PhaseDensity, force: &ForceField, dt: f64) -> f64 {
    let g = rho.grid.clone();
    let (nv, dv) = (g.nv, g.dv());
    let mut p = vec![0.0; nv + 1];
    let mut leaked = 0.0;
    for i in 0..g.nx {
        let row = &mut rho.values[i * nv..(i + 1) * nv];
        for j in 0..nv {
            p[j + 1] = p[j] + row[j];
        }
        let (a, b) = (force.slope[i], force.offset[i]);
        let decay = (-a * dt).exp();
        let phi = if a == 0.0 { dt } else { -(-a * dt).exp_m1() / a };
        // departure point of interface k, in cell units
        let depart = |k: usize| {
            let w = g.v_min + k as f64 * dv;
            (w * decay - b * phi - g.v_min) / dv
        };
        let mut lo = primitive_at(&p, depart(0));
        let first = lo;
        for j in 0..nv {
            let hi = primitive_at(&p, depart(j + 1));
            row[j] = hi - lo;
            lo = hi;
        }
        leaked += (p[nv] - (lo - first)) * g.cell_area();
    }
    leaked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_shift_is_exact_rotation() {
        let col = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut out = [0.0; 5];
        shift_periodic(&col, 2.0, &mut out);
        assert_eq!(out, [4.0, 5.0, 1.0, 2.0, 3.0]);
        shift_periodic(&col, -1.0, &mut out);
        assert_eq!(out, [2.0, 3.0, 4.0, 5.0, 1.0]);
    }

    #[test]
    fn shift_preserves_sum_and_constants() {
        let col: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).sin() + 2.0).collect();
        let mut out = vec![0.0; 16];
        for &s in &[0.3, -0.45, 1.7, -2.2] {
            shift_periodic(&col, s, &mut out);
            let d: f64 = out.iter().sum::<f64>() - col.iter().sum::<f64>();
            assert!(d.abs() < 1e-12);
        }
        let flat = vec![3.0; 8];
        let mut out = vec![0.0; 8];
        shift_periodic(&flat, 0.37, &mut out);
        assert!(out.iter().all(|v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn shift_reproduces_cubic_averages() {
        // cell averages of a smooth periodic profile shift with third-order error
        let avg = |n: usize, s: f64| -> Vec<f64> {
            let h = 1.0 / n as f64;
            (0..n)
                .map(|k| {
                    let (a, b) = (k as f64 * h - s, (k + 1) as f64 * h - s);
                    let tau = 2.0 * std::f64::consts::PI;
                    (-(tau * b).cos() + (tau * a).cos()) / (tau * h)
                })
                .collect()
        };
        let mut errs = vec![];
        for &n in &[32usize, 64] {
            let h = 1.0 / n as f64;
            let col = avg(n, 0.0);
            let mut out = vec![0.0; n];
            shift_periodic(&col, 0.4, &mut out);
            let exact = avg(n, 0.4 * h);
            errs.push(out.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(errs[0] / errs[1] > 7.0, "{errs:?}");
    }
}
