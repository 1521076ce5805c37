use super::*;
use crate::kinetic::{moments, second_moment};
use crate::model::{CuckerSmale, PairPotential};
use std::f64::consts::PI;

fn grid(n: usize) -> HydroGrid {
    HydroGrid::new(-PI, PI, n).unwrap()
}

fn still() -> ModelSpec {
    ModelSpec::two_body(PairPotential::Harmonic { stiffness: 0.0 }, Sign::Minus)
}

#[test]
fn constant_velocity_transports_density() {
    let g = grid(256);
    let profile = |x: f64| 1.0 + 0.5 * x.sin();
    let s0 = HydroState::from_fn(g.clone(), profile, |_| 0.5).unwrap();
    let mut s = s0.clone();
    let dt = 0.5 * g.dx();
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        s = step_euler(&s, &still(), dt).unwrap();
    }
    let t = steps as f64 * dt;
    let norm = 2.0 * PI;
    let err: f64 = g.xs().iter().zip(&s.mu).map(|(&x, m)| (m - profile(x - 0.5 * t) / norm).abs() * g.dx()).sum();
    assert!(err < 2e-3, "{err}");
    assert!(s.velocity().iter().all(|u| (u - 0.5).abs() < 1e-12));
}

#[test]
fn uniform_rest_state_is_stationary() {
    let s = HydroState::from_fn(grid(32), |_| 1.0, |_| 0.0).unwrap();
    let model = ModelSpec::two_body(PairPotential::MorseBounded { depth: 1.0, range: 0.5 }, Sign::Minus);
    let out = step_euler(&s, &model, 0.01).unwrap();
    for (a, b) in out.mu.iter().zip(&s.mu) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(out.q.iter().all(|q| q.abs() < 1e-15));
}

#[test]
fn antisymmetric_interactions_conserve_momentum() {
    let blobs = |x: f64| (-(x - 1.0).powi(2) / 0.1).exp() + (-(x + 1.0).powi(2) / 0.1).exp() + 1e-3;
    let u = |x: f64| if x > 0.0 { -0.5 } else { 0.8 };
    let cs = ModelSpec::new(Interaction::CuckerSmale(CuckerSmale { coupling: 2.0, radius: 1.0, decay: 0.5, sign: Sign::Minus }));
    let morse = ModelSpec::two_body(PairPotential::MorseBounded { depth: 1.0, range: 0.5 }, Sign::Minus);
    for model in [cs, morse] {
        let mut s = HydroState::from_fn(grid(128), blobs, u).unwrap();
        for _ in 0..100 {
            let p = s.total_momentum();
            s = step_euler(&s, &model, 0.01).unwrap();
            assert!((s.total_momentum() - p).abs() <= 1e-8);
        }
    }
}

#[test]
fn hyperbolic_cfl_is_enforced() {
    let s = HydroState::from_fn(grid(64), |_| 1.0, |_| 3.0).unwrap();
    assert!(matches!(step_euler(&s, &still(), 0.1), Err(Error::Cfl { section: "euler", .. })));
}

#[test]
fn unit_eps_matches_friction_euler() {
    let g = grid(64);
    let model = keller_segel_eps_model(1.0, 0.5, 1.0, 0.1);
    let s = HydroState::from_fn(g.clone(), |x| 1.0 + 0.3 * x.cos(), |x| 0.2 * x.sin())
        .unwrap()
        .with_psi(ChemicalField::zeros(g.field_grid().unwrap()))
        .unwrap();
    let a = step_euler(&s, &model, 0.01).unwrap();
    let b = step_euler_eps(&s, &model, 0.01).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mollifier_must_span_four_cells() {
    let g = grid(64);
    let model = keller_segel_eps_model(0.01, 1.0, 1.0, 1.0);
    let s = HydroState::from_fn(g.clone(), |_| 1.0, |_| 0.0)
        .unwrap()
        .with_params(HydroParams { eps: 0.01, ..HydroParams::default() })
        .with_psi(ChemicalField::zeros(g.field_grid().unwrap()))
        .unwrap();
    assert!(matches!(step_euler_eps(&s, &model, 1e-3), Err(Error::InvalidParameter { .. })));
}

#[test]
fn constant_state_with_balanced_potential_is_stationary() {
    let g = grid(64);
    let (eps, kappa) = (0.2, 2.0);
    let model = keller_segel_eps_model(eps, 1.0, kappa, 0.5);
    let s = HydroState::from_fn(g.clone(), |_| 1.0, |_| 0.0).unwrap();
    let field = g.field_grid().unwrap();
    let chi = model.chemistry().unwrap().chi();
    let source = crate::kinetic::density_source_cells(&ChemicalField::zeros(field.clone()), &chi, &s.mu, &g.cells());
    let psi = ChemicalField { grid: field, values: source.iter().map(|v| v / kappa).collect() };
    let s = s.with_params(HydroParams { eps, ..HydroParams::default() }).with_psi(psi).unwrap();
    let out = step_euler_eps(&s, &model, 1e-3).unwrap();
    for (a, b) in out.mu.iter().zip(&s.mu) {
        assert!((a - b).abs() < 1e-13);
    }
    assert!(out.q.iter().all(|q| q.abs() < 1e-12));
    for (a, b) in out.psi.unwrap().values.iter().zip(&s.psi.unwrap().values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn small_eps_velocity_relaxes_to_force_balance() {
    let g = grid(128);
    let eps = 0.04;
    let model = keller_segel_eps_model(eps, 1.0, 1.0, 1.0);
    let mut s = HydroState::from_fn(g.clone(), |x| (-x * x).exp() + 0.05, |_| 0.0)
        .unwrap()
        .with_params(HydroParams { eps, convection: ConvectiveScaling::Full, ..HydroParams::default() })
        .with_psi(ChemicalField::zeros(g.field_grid().unwrap()))
        .unwrap();
    let dt = 1e-3;
    for _ in 0..300 {
        s = step_euler_eps(&s, &model, dt).unwrap();
    }
    let f = moment_force(&g.cells(), &s.mu, &s.q, &model.law, s.psi.as_ref()).unwrap();
    let u = s.velocity();
    let scale = f.offset.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let gap = u.iter().zip(&f.offset).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 0.1 * scale, "gap {gap} scale {scale}");
}

#[test]
fn cyclic_solver_matches_dense_elimination() {
    let n = 7;
    let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
    let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
    let diag: Vec<f64> = (0..n).map(|i| 4.0 + (i % 3) as f64).collect();
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
    // Gaussian elimination with partial pivoting on the dense matrix
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        a[i][i] = diag[i];
        a[i][(i + n - 1) % n] += lower[i];
        a[i][(i + 1) % n] += upper[i];
        a[i][n] = rhs[i];
    }
    for c in 0..n {
        let p = (c..n).max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    for i in 0..n {
        assert!((x[i] - a[i][n] / a[i][i]).abs() < 1e-12);
    }
}

fn ks(kappa: f64) -> KellerSegel {
    KellerSegel { eta: 1.0, kappa, diffusivity: 1.0, drift: DriftForm::Gradient }
}

#[test]
fn uniform_density_is_a_keller_segel_steady_state() {
    let g = grid(32);
    let mu = vec![1.0 / (2.0 * PI); 32];
    let (next, psi) = step_keller_segel(&g, &mu, &ks(2.0), 1e-3).unwrap();
    for (a, b) in next.iter().zip(&mu) {
        assert!((a - b).abs() < 1e-15);
    }
    for p in psi {
        assert!((p - mu[0] / 2.0).abs() < 1e-13);
    }
}

#[test]
fn large_kappa_potential_follows_density() {
    let g = grid(128);
    let mu: Vec<f64> = g.xs().iter().map(|x| 1.0 + 0.5 * x.cos()).collect();
    let psi = solve_potential(&g, &mu, &ks(1e3)).unwrap();
    for (p, m) in psi.iter().zip(&mu) {
        assert!((p * 1e3 / m - 1.0).abs() < 0.01);
    }
}

#[test]
fn keller_segel_conserves_mass_and_rejects_bad_parameters() {
    let g = grid(64);
    let mut mu: Vec<f64> = g.xs().iter().map(|x| (-2.0 * x * x).exp() / (PI / 2.0).sqrt()).collect();
    let dx = g.dx();
    let m0: f64 = mu.iter().sum::<f64>() * dx;
    for _ in 0..200 {
        let before: f64 = mu.iter().sum::<f64>() * dx;
        mu = step_keller_segel(&g, &mu, &ks(1.0), 1e-3).unwrap().0;
        assert!((mu.iter().sum::<f64>() * dx - before).abs() <= 1e-8);
    }
    assert!((mu.iter().sum::<f64>() * dx - m0).abs() < 1e-10);
    assert!(matches!(step_keller_segel(&g, &mu, &ks(0.0), 1e-3), Err(Error::Elliptic(_))));
    assert!(matches!(step_keller_segel(&g, &mu, &ks(1.0), 1.0), Err(Error::Cfl { .. })));
}

#[test]
fn monokinetic_moments_recover_the_fields() {
    let pg = PhaseGrid::new((-PI, PI), 32, (-3.0, 3.0), 120).unwrap();
    let xs = pg.xs();
    let mu: Vec<f64> = xs.iter().map(|x| 1.0 + 0.4 * x.sin()).collect();
    let u: Vec<f64> = xs.iter().map(|x| 0.5 * x.cos()).collect();
    let mass: f64 = mu.iter().sum::<f64>() * pg.dx();
    for &sigma in &[pg.dv(), 0.3] {
        let rho = monokinetic_init(pg.clone(), &mu, &u, sigma).unwrap();
        let m = moments(&rho);
        let e2 = second_moment(&rho);
        for i in 0..pg.nx {
            assert!((m.mu[i] - mu[i] / mass).abs() < 1e-12);
            assert!((m.u[i] - u[i]).abs() < 1e-8);
            let expect = mu[i] / mass * (u[i] * u[i] + sigma * sigma);
            assert!((e2[i] - expect).abs() < 1e-3 * expect, "{} {}", e2[i], expect);
        }
    }
    let rest = monokinetic_init(pg.clone(), &mu, &vec![0.0; 32], 0.2).unwrap();
    for i in 0..pg.nx {
        for j in 0..pg.nv {
            let (a, b) = (rest.at(i, j), rest.at(i, pg.nv - 1 - j));
            assert!((a - b).abs() <= 1e-12 * a.max(b));
        }
    }
    assert!(monokinetic_init(pg.clone(), &mu, &u, 0.5 * pg.dv()).is_err());
}
