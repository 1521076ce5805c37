//! Acceptance criteria 1 to 9, one line of output per criterion.
//!
//! Runs as a plain binary: `cargo test --test acceptance -- 4 5` restricts
//! the run to the listed criteria.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use meanfield_core::hydro::{
    step_euler, step_keller_segel, ConvectiveScaling, DriftForm, HydroGrid, HydroState, KellerSegel,
};
use meanfield_core::kinetic::{step_vlasov, KernelRange, KineticState, PhaseDensity, PhaseGrid};
use meanfield_core::lab::{
    compare_ve, eps_sweep, ks_limit, run, vlasov_snapshots, ExperimentConfig, KsLimitSection, Profile,
};
use meanfield_core::model::{
    Boundary, ChemicalField, Chemotaxis, FieldGrid, ModelSpec, PairLaw, PairPotential, ParticleEnsemble, Sign,
};
use meanfield_core::particles::{
    run_replicas, step_chemical, step_particles, two_body_energy, ChemSource, InitialLaw, IntegratorConfig,
    ReplicaPlan,
};
use meanfield_core::transport::{chaos_error, wasserstein, ChaosOptions, DiscreteMeasure, Quantization, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gauss(z: f64, s: f64) -> f64 {
    (-0.5 * z * z / (s * s)).exp()
}

fn l1(a: &[f64], b: &[f64], h: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * h
}

fn random_measure(rng: &mut ChaCha8Rng) -> DiscreteMeasure {
    let n = rng.random_range(1..=200usize);
    // a coarse lattice forces ties and shared atoms between the two sides
    let lattice = rng.random_bool(0.3);
    let points: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-5.0..5.0);
            if lattice {
                (x * 2.0).round() / 2.0
            } else {
                x
            }
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    // absorb the rounding of the normalisation in the last weight
    let rest: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - rest;
    DiscreteMeasure::new(1, points, w).unwrap()
}

fn transport_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_measure(&mut rng);
        let b = random_measure(&mut rng);
        for p in [1, 2] {
            let q = wasserstein(&a, &b, p, Solver::Exact).unwrap().value;
            let lp = wasserstein(&a, &b, p, Solver::NetworkSimplex).unwrap().value;
            worst = worst.max((q - lp).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-9 && secs < 60.0, format!("max |quantile - LP| = {worst:.2e} over 200 instances, {secs:.1}s"))
}

const RATE_STUDY: &str = r#"
experiment = "rate_study"
output_dir = "out"

# omega = 2 pi: t = 1 is one full period of the mean-field flow
[model]
law = { kind = "two_body", potential = { name = "harmonic", stiffness_per_time2 = 39.47841760435743 }, sign = -1 }

[integrator]
scheme = "rk4"
dt_time = 0.01
t_final_time = 1.0

# stationary law: velocity_std = omega * position_std
[particles]
replicas = 2000
seed = 20
dim = 1
snapshot_times_time = [0.0, 1.0]
initial_law = { name = "gaussian", position_std_length = 0.15915494309189535, velocity_std = 1.0 }

[phase_grid]
x_min_length = -1.0
x_max_length = 1.0
nx = 60
v_min = -5.5
v_max = 5.5
nv = 66
kernel_range = "direct"

[vlasov]
dt_time = 0.002
snapshot_times_time = [0.0, 1.0]
initial = { kind = "particle_law" }

[rate_study]
particle_counts = [16, 32, 64, 128, 256, 512]
t_time = 1.0
quantization = { mode = "grid", block = 1 }
solver = { solver = "exact" }
"#;

fn mean_field_rate() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(RATE_STUDY).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let summary = match run(&cfg) {
        Ok(out) => out.summary,
        Err(e) => return outcome(false, format!("rate study failed: {e}")),
    };
    let alpha = summary["alpha_hat"].as_f64().unwrap();
    let se = summary["slope_std_error"].as_f64().unwrap();
    let raw: Vec<f64> = serde_json::from_value(summary["raw_distances"].clone()).unwrap();
    let floor = summary["noise_floor"].as_f64().unwrap();
    let secs = start.elapsed().as_secs_f64();
    let sigmas = alpha / se;
    outcome(
        alpha >= 0.2 && sigmas >= 3.0 && secs <= 900.0,
        format!(
            "alpha_hat = {alpha:.3} ({sigmas:.1} sigma), floor = {floor:.4}, raw W2 = {:?}, {secs:.0}s",
            raw.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn propagation_of_chaos() -> Outcome {
    let start = Instant::now();
    let model = ModelSpec::cucker_smale(2.0, 1.0, 1.0, Sign::Minus);
    let law = InitialLaw::Gaussian { position_mean: 0.0, position_std: 1.0, velocity_mean: 0.0, velocity_std: 1.0 };
    let grid = PhaseGrid::new((-7.0, 7.0), 120, (-5.0, 5.0), 120).unwrap().with_range(KernelRange::Direct);
    let rho0 = KineticState::new(PhaseDensity::from_law(grid, &law).unwrap());
    let reference = vlasov_snapshots(&rho0, &model, 0.004, &[1.0]).unwrap().pop().unwrap();
    let opts = ChaosOptions {
        quantization: Quantization::Grid { block: 4 },
        solver: Solver::Exact,
        directions: 256,
        seed: 9,
    };
    let cfg = IntegratorConfig::rk4(0.02, 1.0);
    let mut rows = vec![];
    for n in [16usize, 64, 256] {
        let plan = ReplicaPlan::new(2000, 31, n, 1, law.clone());
        let replicas = run_replicas(&plan, &model, &cfg, &[1.0]).unwrap();
        let d = chaos_error(&replicas, 0, &reference.density, 2, model.kind(), &opts).unwrap();
        rows.push((n, d.value, d.std_error.unwrap_or(0.0)));
    }
    let within_ci = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let decreased = rows[2].1 < rows[0].1;
    let secs = start.elapsed().as_secs_f64();
    let table: Vec<String> = rows.iter().map(|(n, d, s)| format!("N={n}: {d:.4}±{s:.4}")).collect();
    outcome(within_ci && decreased && secs <= 900.0, format!("{}, {secs:.0}s", table.join(", ")))
}

/// Cell averages of `f` by 4-point Gauss-Legendre in each direction.
fn cell_averages(g: &PhaseGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodes = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    let weights = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let (hx, hv) = (0.5 * g.dx(), 0.5 * g.dv());
    let mut out = Vec::with_capacity(g.nx * g.nv);
    for i in 0..g.nx {
        for j in 0..g.nv {
            let mut s = 0.0;
            for (a, wa) in nodes.iter().zip(&weights) {
                for (b, wb) in nodes.iter().zip(&weights) {
                    s += wa * wb * f(g.x(i) + a * hx, g.v(j) + b * hv);
                }
            }
            out.push(s / 4.0);
        }
    }
    out
}

fn free_transport() -> Outcome {
    let model = ModelSpec::two_body(PairPotential::Harmonic { stiffness: 0.0 }, Sign::Minus);
    let profile = |x: f64, v: f64| (1.0 + 0.5 * (PI * x).sin()) * gauss(v, 0.8);
    let mut errs = vec![];
    for n in [128usize, 256] {
        let g = PhaseGrid::new((-1.0, 1.0), n, (-4.0, 4.0), n).unwrap();
        let rho = PhaseDensity::from_fn(g.clone(), profile).unwrap();
        let dt = 0.5 * g.dx() / 4.0;
        let steps = (1.0 / dt).round() as usize;
        let mut s = KineticState::new(rho);
        for _ in 0..steps {
            s = step_vlasov(&s, &model, dt).unwrap();
        }
        let t = steps as f64 * dt;
        let z: f64 = cell_averages(&g, profile).iter().sum::<f64>() * g.cell_area();
        let exact = cell_averages(&g, |x, v| profile(x - v * t, v) / z);
        errs.push(l1(&s.density.values, &exact, g.cell_area()));
    }
    let ratio = errs[0] / errs[1];
    outcome(
        errs[1] <= 5e-3 && ratio >= 3.5,
        format!("L1 = {:.3e} at 128², {:.3e} at 256², ratio {ratio:.2}", errs[0], errs[1]),
    )
}

fn monokinetic_setup(n: usize) -> (KineticState, HydroState, f64) {
    let g = PhaseGrid::new((-1.0, 1.0), n, (-2.0, 2.0), n).unwrap();
    let xs = g.xs();
    let mu: Vec<f64> = xs.iter().map(|x| 1.0 + 0.3 * (PI * x).cos()).collect();
    let u: Vec<f64> = xs.iter().map(|x| 0.2 * (PI * x).sin()).collect();
    let sigma_v = 4.0 * g.dv();
    let rho = meanfield_core::hydro::monokinetic_init(g.clone(), &mu, &u, sigma_v).unwrap();
    let hydro = HydroState::new(HydroGrid::of_phase(&g), mu, &u).unwrap();
    (KineticState::new(rho), hydro, 0.4 * g.dx() / 2.0)
}

fn snapshot_times() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn monokinetic_equivalence() -> Outcome {
    let model = ModelSpec::cucker_smale(1.0, 0.5, 1.0, Sign::Minus);
    let mut rows = vec![];
    for n in [128usize, 256] {
        let (kin, hyd, dt) = monokinetic_setup(n);
        let (m, _, _) = compare_ve(&kin, &hyd, &model, dt, dt, &snapshot_times()).unwrap();
        rows.push((m.mu_relative(), m.momentum_relative()));
    }
    let fine_ok = rows[1].0 <= 0.05 && rows[1].1 <= 0.05;
    let decreasing = rows[1].0 < rows[0].0 && rows[1].1 < rows[0].1;
    outcome(
        fine_ok && decreasing,
        format!(
            "mismatch (mu, mu u): ({:.2}%, {:.2}%) at 128², ({:.2}%, {:.2}%) at 256²",
            100.0 * rows[0].0,
            100.0 * rows[0].1,
            100.0 * rows[1].0,
            100.0 * rows[1].1
        ),
    )
}

fn keller_segel_limit() -> Outcome {
    let start = Instant::now();
    let section = KsLimitSection {
        eps_values: vec![0.2, 0.1, 0.05],
        eta: 1.0,
        kappa: 1.0,
        diffusivity: 1.0,
        grid: HydroGrid::new(-PI, PI, 256).unwrap(),
        dt: 2e-4,
        t_final: 1.0,
        initial_density: Profile::Gaussian { center: 0.0, width: 0.5f64.sqrt(), amplitude: 1.0, background: 0.1 },
        convection: ConvectiveScaling::Full,
    };
    let report = match ks_limit(&section) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("ks_limit failed: {e}")),
    };
    let d: Vec<f64> = report.rows.iter().map(|r| r.1).collect();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        d.windows(2).all(|w| w[1] < w[0]) && secs <= 600.0,
        format!("L1 at eps = 0.2, 0.1, 0.05: {:.4}, {:.4}, {:.4}, {secs:.0}s", d[0], d[1], d[2]),
    )
}

fn max_step_drift<S>(mut state: S, steps: usize, mut step: impl FnMut(&S) -> S, mass: impl Fn(&S) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let next = step(&state);
        worst = worst.max((mass(&next) - mass(&state)).abs());
        state = next;
    }
    worst
}

fn conservation() -> Outcome {
    let cs = ModelSpec::cucker_smale(1.0, 0.5, 1.0, Sign::Minus);
    let harmonic = ModelSpec::two_body(PairPotential::Harmonic { stiffness: 1.0 }, Sign::Minus);

    let g = PhaseGrid::new((-1.0, 1.0), 64, (-4.0, 4.0), 64).unwrap();
    let rho = PhaseDensity::from_fn(g.clone(), |x, v| (1.2 + (PI * x).cos()) * gauss(v - 0.5 * (PI * x).sin(), 0.6)).unwrap();
    let mut mass_drift = 0.0f64;
    for model in [&cs, &harmonic] {
        mass_drift = mass_drift.max(max_step_drift(
            KineticState::new(rho.clone()),
            200,
            |s| step_vlasov(s, model, 0.005).unwrap(),
            |s| s.density.mass(),
        ));
    }
    let hg = HydroGrid::new(-1.0, 1.0, 128).unwrap();
    let hyd = HydroState::from_fn(hg.clone(), |x| 1.0 + 0.3 * (PI * x).cos(), |x| 0.5 * (PI * x).sin()).unwrap();
    mass_drift = mass_drift.max(max_step_drift(hyd, 500, |s| step_euler(s, &cs, 0.002).unwrap(), |s| s.mass()));
    let ks = KellerSegel { eta: 1.0, kappa: 1.0, diffusivity: 1.0, drift: DriftForm::Gradient };
    let kg = HydroGrid::new(-PI, PI, 128).unwrap();
    let mu0: Vec<f64> = kg.xs().iter().map(|x| (-x * x).exp() + 0.1).collect();
    let dx = kg.dx();
    mass_drift = mass_drift.max(max_step_drift(
        mu0,
        500,
        |mu| step_keller_segel(&kg, mu, &ks, 5e-4).unwrap().0,
        |mu| mu.iter().sum::<f64>() * dx,
    ));

    let mut energy_drift = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..20).map(|_| rng.random_range(-0.5..0.5)).collect();
    let bump = ModelSpec::two_body(PairPotential::GaussianBump { amplitude: 1.0, width: 0.5 }, Sign::Minus);
    let cfg = IntegratorConfig::rk4(1e-3, 10.0);
    for model in [&bump, &harmonic] {
        let mut ens = ParticleEnsemble::unit_mass(2, x.clone(), v.clone()).unwrap();
        let e0 = two_body_energy(model, &ens).unwrap();
        for k in 1..=10_000 {
            ens = step_particles(&ens, model, &cfg).unwrap();
            if k % 50 == 0 {
                energy_drift = energy_drift.max((two_body_energy(model, &ens).unwrap() - e0).abs());
            }
        }
    }

    let law = InitialLaw::Gaussian { position_mean: 0.0, position_std: 1.0, velocity_mean: 0.0, velocity_std: 1.0 };
    let plan = ReplicaPlan::new(20, 5, 32, 2, law);
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
    let replicas = run_replicas(&plan, &cs, &IntegratorConfig::rk4(0.01, 5.0), &times).unwrap();
    let mut violations = 0;
    for r in 0..plan.replicas {
        let diam: Vec<f64> = replicas
            .snapshots
            .iter()
            .map(|s| {
                let st = &s.states[r];
                ParticleEnsemble::unit_mass(2, st.positions.clone(), st.velocities.clone()).unwrap().velocity_diameter()
            })
            .collect();
        violations += diam.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
    }

    outcome(
        mass_drift <= 1e-8 && energy_drift <= 1e-6 && violations == 0,
        format!(
            "mass drift/step {mass_drift:.2e}, energy drift {energy_drift:.2e}, diameter increases {violations}"
        ),
    )
}

fn chemotaxis(kappa: f64, diffusivity: f64) -> Chemotaxis {
    Chemotaxis { pair: PairLaw::None, eta: 1.0, kappa, diffusivity, chi_radius: 0.2, external: None }
}

fn chemical_field() -> Outcome {
    let (c, kappa) = (2.0, 0.5);
    let chem = chemotaxis(kappa, 0.1);
    let mut worst = 0.0f64;
    let grids = [
        FieldGrid::line(0.0, 1.0, 32, Boundary::Periodic).unwrap(),
        FieldGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![16, 16], Boundary::HomogeneousNeumann).unwrap(),
    ];
    for grid in &grids {
        let mut f = ChemicalField::zeros(grid.clone());
        for _ in 0..20_000 {
            f = step_chemical(&f, ChemSource::Uniform(c), &chem, 0.004).unwrap();
        }
        worst = worst.max(f.values.iter().map(|p| (p - c / kappa).abs() / (c / kappa)).fold(0.0, f64::max));
    }
    let mut zero_exact = true;
    for grid in &grids {
        let mut f = ChemicalField::zeros(grid.clone());
        for _ in 0..1000 {
            f = step_chemical(&f, ChemSource::None, &chem, 0.004).unwrap();
        }
        zero_exact &= f.values.iter().all(|&p| p == 0.0);
    }
    outcome(
        worst <= 1e-6 && zero_exact,
        format!("steady state relative error {worst:.2e}, zero source stays zero: {zero_exact}"),
    )
}

fn pressure_sweep() -> Outcome {
    let model = ModelSpec::cucker_smale(1.0, 0.5, 1.0, Sign::Minus);
    let (kin, hyd, dt) = monokinetic_setup(128);
    let report = match eps_sweep(&kin, &hyd, &model, dt, dt, &snapshot_times(), &[0.0, 1e-3, 1e-2, 1e-1]) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let table: Vec<String> = report.rows.iter().map(|r| format!("{:.0e}: {:.4e}", r.eps_p, r.mismatch.total())).collect();
    outcome(
        report.rows.len() == 4,
        format!(
            "mismatch by eps_p [{}], argmin {}, interior optimum: {}",
            table.join(", "),
            report.argmin,
            report.interior_optimum
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "transport oracle equivalence", transport_oracle),
        (2, "mean-field rate", mean_field_rate),
        (3, "propagation of chaos", propagation_of_chaos),
        (4, "free transport", free_transport),
        (5, "monokinetic equivalence", monokinetic_equivalence),
        (6, "Keller-Segel limit", keller_segel_limit),
        (7, "conservation suite", conservation),
        (8, "chemical field", chemical_field),
        (9, "pressure sweep", pressure_sweep),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| outcome(false, "panicked"));
        total += start.elapsed();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name}: {}", result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} failed, {:.0}s", total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
