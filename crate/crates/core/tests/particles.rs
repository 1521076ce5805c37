use meanfield_core::model::{ModelSpec, PairPotential, ParticleEnsemble, Sign};
use meanfield_core::particles::{
    run_replicas, sample_initial, step_particles, two_body_energy, InitialLaw, IntegratorConfig, ReplicaPlan,
    ReplicaRun,
};

fn box_law() -> InitialLaw {
    InitialLaw::UniformBox { position_lo: -2.0, position_hi: 3.0, velocity_lo: -1.0, velocity_hi: 1.0 }
}

/// Kolmogorov-Smirnov statistic of `sample` against the uniform law on `[lo, hi]`.
fn ks_uniform(mut sample: Vec<f64>, lo: f64, hi: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn initial_marginals_match_the_law() {
    let plan = ReplicaPlan::new(1, 42, 10_000, 1, box_law());
    let ens = sample_initial(&plan, 0).unwrap();
    // 1% critical value of the one-sample test
    let crit = 1.63 / (10_000f64).sqrt();
    assert!(ks_uniform(ens.positions.clone(), -2.0, 3.0) < crit);
    assert!(ks_uniform(ens.velocities.clone(), -1.0, 1.0) < crit);
}

#[test]
fn replicas_are_independent_draws() {
    // first particle over many replicas is again a sample of the law
    let plan = ReplicaPlan::new(5000, 3, 2, 1, box_law());
    let xs: Vec<f64> = (0..plan.replicas).map(|r| sample_initial(&plan, r).unwrap().positions[0]).collect();
    assert!(ks_uniform(xs, -2.0, 3.0) < 1.63 / (5000f64).sqrt());
}

#[test]
fn hamiltonian_energy_is_kept_by_rk4() {
    let model = ModelSpec::two_body(PairPotential::GaussianBump { amplitude: 0.5, width: 0.4 }, Sign::Minus);
    let plan = ReplicaPlan::new(1, 8, 12, 2, box_law());
    let mut ens = sample_initial(&plan, 0).unwrap();
    let cfg = IntegratorConfig::rk4(1e-3, 2.0);
    let e0 = two_body_energy(&model, &ens).unwrap();
    for _ in 0..2000 {
        ens = step_particles(&ens, &model, &cfg).unwrap();
    }
    assert!((two_body_energy(&model, &ens).unwrap() - e0).abs() < 1e-9);
}

fn diameters(run: &ReplicaRun, replica: usize) -> Vec<f64> {
    run.snapshots
        .iter()
        .map(|s| {
            let st = &s.states[replica];
            ParticleEnsemble::unit_mass(run.dim, st.positions.clone(), st.velocities.clone())
                .unwrap()
                .velocity_diameter()
        })
        .collect()
}

#[test]
fn aligning_cucker_smale_contracts_velocities() {
    let model = ModelSpec::cucker_smale(1.5, 1.0, 0.5, Sign::Minus);
    let plan = ReplicaPlan::new(6, 12, 20, 2, box_law());
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
    let run = run_replicas(&plan, &model, &IntegratorConfig::rk4(0.02, 4.0), &times).unwrap();
    for r in 0..plan.replicas {
        let d = diameters(&run, r);
        assert!(d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "replica {r}: {d:?}");
        assert!(d[d.len() - 1] < d[0]);
    }
}

#[test]
fn runs_do_not_depend_on_the_thread_count() {
    let model = ModelSpec::cucker_smale(1.0, 0.5, 1.0, Sign::Minus);
    let plan = ReplicaPlan::new(9, 99, 16, 1, box_law());
    let cfg = IntegratorConfig::rk4(0.05, 1.0);
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replicas(&plan, &model, &cfg, &[0.5, 1.0]).unwrap())
    };
    assert_eq!(go(1), go(4));
}
