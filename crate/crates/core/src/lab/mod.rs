//! Experiment orchestration behind the `meanfield-lab` command: strict TOML
//! configs, runs, and artifact files (CSV snapshots, a JSON summary and a
//! manifest).

mod config;
mod experiments;
mod io;
mod profile;

pub use config::{
    ChemicalSection, CompareSection, EpsSweepSection, ExperimentConfig, ExperimentKind, HydroInitial, HydroSection,
    KellerSegelSection, KsLimitSection, ParticlesSection, RateStudySection, VlasovInitial, VlasovSection,
};
pub use experiments::{
    compare_ve, dedup_pressures, eps_sweep, euler_snapshots, hydro_initial, keller_segel_snapshots, ks_limit,
    moment_mismatch, rate_study, vlasov_initial, vlasov_snapshots, KsLimitReport, Mismatch, RateStudyReport,
    SweepReport, SweepRow,
};
pub use io::{sha256_file, write_json, Cell, FileEntry, Manifest, Table};
pub use profile::Profile;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hydro::{HydroGrid, HydroState};
use crate::kinetic::{moments, KineticState};
use crate::particles::{run_replicas, ReplicaRun};
use crate::transport::{chaos_error, ChaosOptions};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "MEANFIELD_THREADS";

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub summary: Value,
    /// Artifact file names, manifest excluded.
    pub files: Vec<String>,
}

/// Worker count: `MEANFIELD_THREADS`, then the config key, then the
/// machine's parallelism.
pub fn thread_count(cfg: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        };
    }
    Ok(cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

/// Loads, validates and runs a config file.
pub fn run_file(path: &Path) -> Result<RunOutcome> {
    let cfg = ExperimentConfig::load(path)?;
    run(&cfg)
}

/// Validates and runs an experiment on a worker pool of [`thread_count`]
/// threads, then writes the summary and manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let threads = thread_count(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Artifacts { dir: cfg.output_dir.clone(), files: Vec::new() };
    let summary = pool.install(|| execute(cfg, &mut out))?;
    out.json(SUMMARY_FILE, &summary)?;
    let mut files = Vec::with_capacity(out.files.len());
    for name in &out.files {
        files.push(FileEntry { name: name.clone(), sha256: sha256_file(&out.dir.join(name))? });
    }
    files.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest {
        experiment: cfg.experiment.name().to_string(),
        config_sha256: cfg.canonical_hash(),
        seeds: cfg.seeds(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files,
    };
    write_json(&out.dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome { output_dir: out.dir, summary, files: out.files })
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn table(&mut self, name: String, t: &Table) -> Result<()> {
        t.write(&self.dir.join(&name))?;
        self.files.push(name);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        write_json(&self.dir.join(name), v)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn particles(&mut self, run: &ReplicaRun) -> Result<()> {
        let d = run.dim;
        let axis = |p: &str, a: usize| if d == 1 { p.to_string() } else { format!("{p}{a}") };
        let mut header = vec!["t".to_string(), "replica".into(), "i".into()];
        header.extend((0..d).map(|a| axis("x", a)));
        header.extend((0..d).map(|a| axis("v", a)));
        for (k, snap) in run.snapshots.iter().enumerate() {
            let mut t = Table::new(header.clone());
            for (r, s) in snap.states.iter().enumerate() {
                for i in 0..run.particles {
                    let mut row = vec![Cell::Real(snap.t), r.into(), i.into()];
                    row.extend(s.positions[i * d..(i + 1) * d].iter().map(|&x| Cell::Real(x)));
                    row.extend(s.velocities[i * d..(i + 1) * d].iter().map(|&x| Cell::Real(x)));
                    t.push(row);
                }
            }
            self.table(format!("particles_{k:03}.csv"), &t)?;
        }
        Ok(())
    }

    /// One field table per snapshot: `t, x` and the named columns.
    fn fields(&mut self, prefix: &str, grid: &HydroGrid, snaps: &[(f64, Vec<(&str, Vec<f64>)>)]) -> Result<()> {
        let xs = grid.xs();
        for (k, (t, cols)) in snaps.iter().enumerate() {
            let mut header = vec!["t", "x"];
            header.extend(cols.iter().map(|c| c.0));
            let mut table = Table::new(header);
            for (i, &x) in xs.iter().enumerate() {
                let mut row = vec![Cell::Real(*t), Cell::Real(x)];
                row.extend(cols.iter().map(|c| Cell::Real(c.1[i])));
                table.push(row);
            }
            self.table(format!("{prefix}_{k:03}.csv"), &table)?;
        }
        Ok(())
    }

    fn kinetic(&mut self, snaps: &[KineticState]) -> Result<()> {
        let grid = HydroGrid::of_phase(&snaps[0].density.grid);
        let rows: Vec<(f64, Vec<(&str, Vec<f64>)>)> = snaps
            .iter()
            .map(|s| {
                let m = moments(&s.density);
                let mut cols = vec![("mu", m.mu), ("momentum", m.momentum)];
                if let Some(c) = &s.chem {
                    cols.push(("phi", c.values.clone()));
                }
                (s.t, cols)
            })
            .collect();
        self.fields("vlasov", &grid, &rows)
    }

    fn hydro(&mut self, prefix: &str, snaps: &[HydroState]) -> Result<()> {
        let rows: Vec<(f64, Vec<(&str, Vec<f64>)>)> = snaps
            .iter()
            .map(|s| {
                let mut cols = vec![("mu", s.mu.clone()), ("momentum", s.q.clone())];
                if let Some(c) = &s.psi {
                    cols.push(("psi", c.values.clone()));
                }
                (s.t, cols)
            })
            .collect();
        self.fields(prefix, &snaps[0].grid, &rows)
    }
}

fn mismatch_json(m: &Mismatch) -> Value {
    json!({
        "mu": m.mu,
        "momentum": m.momentum,
        "mu_relative": m.mu_relative(),
        "momentum_relative": m.momentum_relative(),
    })
}

fn execute(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Value> {
    use ExperimentKind::*;
    let name = cfg.experiment.name();
    match cfg.experiment {
        Particles => {
            let p = cfg.particles()?;
            let model = cfg.model()?;
            let plan = p.plan(p.count.expect("validated"))?;
            let run = run_replicas(&plan, model, cfg.integrator()?, &p.snapshot_times)?;
            out.particles(&run)?;
            Ok(json!({
                "experiment": name,
                "model": model.kind(),
                "replicas": plan.replicas,
                "particles": plan.particles,
                "dim": plan.dim,
                "snapshot_times": p.snapshot_times,
            }))
        }
        Vlasov => {
            let v = cfg.vlasov()?;
            let model = cfg.model()?;
            let snaps = vlasov_snapshots(&vlasov_initial(cfg)?, model, v.dt, &v.snapshot_times)?;
            out.kinetic(&snaps)?;
            let mass: Vec<f64> = snaps.iter().map(|s| s.density.mass()).collect();
            Ok(json!({ "experiment": name, "model": model.kind(), "snapshot_times": v.snapshot_times, "mass": mass }))
        }
        Euler => {
            let h = cfg.hydro()?;
            let model = cfg.model()?;
            let eps_scaled = model.friction.is_some();
            let snaps = euler_snapshots(&hydro_initial(cfg)?, model, h.dt, &h.snapshot_times, eps_scaled)?;
            out.hydro("euler", &snaps)?;
            let mass: Vec<f64> = snaps.iter().map(|s| s.mass()).collect();
            Ok(json!({ "experiment": name, "model": model.kind(), "snapshot_times": h.snapshot_times, "mass": mass }))
        }
        KellerSegel => {
            let s = cfg.keller_segel.as_ref().expect("validated");
            let init = HydroState::new(s.grid.clone(), s.initial_density.sample(&s.grid.xs()), &vec![0.0; s.grid.nx])?;
            let snaps = keller_segel_snapshots(&s.grid, &init.mu, &s.params, s.dt, &s.snapshot_times)?;
            let rows: Vec<(f64, Vec<(&str, Vec<f64>)>)> = s
                .snapshot_times
                .iter()
                .zip(snaps)
                .map(|(&t, (mu, psi))| (t, vec![("mu", mu), ("psi", psi)]))
                .collect();
            out.fields("keller_segel", &s.grid, &rows)?;
            Ok(json!({ "experiment": name, "snapshot_times": s.snapshot_times }))
        }
        ComparePv => {
            let p = cfg.particles()?;
            let v = cfg.vlasov()?;
            let model = cfg.model()?;
            let c = cfg.compare.clone().unwrap_or_default();
            let run = run_replicas(&p.plan(p.count.expect("validated"))?, model, cfg.integrator()?, &p.snapshot_times)?;
            let kin = vlasov_snapshots(&vlasov_initial(cfg)?, model, v.dt, &v.snapshot_times)?;
            let opts =
                ChaosOptions { quantization: c.quantization, solver: c.solver, directions: c.directions, seed: c.sliced_seed };
            let mut table = Table::new(["t", "order", "distance", "std_error"]);
            let mut estimators = Vec::new();
            for (k, s) in kin.iter().enumerate() {
                for &j in &c.orders {
                    let d = chaos_error(&run, k, &s.density, j, model.kind(), &opts)?;
                    table.push(vec![Cell::Real(s.t), j.into(), Cell::Real(d.value), Cell::Real(d.std_error.unwrap_or(0.0))]);
                    estimators.push(d.estimator);
                }
            }
            out.table("compare_pv.csv".into(), &table)?;
            out.particles(&run)?;
            out.kinetic(&kin)?;
            Ok(json!({
                "experiment": name,
                "model": model.kind(),
                "times": p.snapshot_times,
                "orders": c.orders,
                "distances": table.column("distance"),
                "std_errors": table.column("std_error"),
                "estimators": estimators,
            }))
        }
        CompareVe => {
            let v = cfg.vlasov()?;
            let h = cfg.hydro()?;
            let model = cfg.model()?;
            let (m, kin, hyd) = compare_ve(&vlasov_initial(cfg)?, &hydro_initial(cfg)?, model, v.dt, h.dt, &v.snapshot_times)?;
            out.kinetic(&kin)?;
            out.hydro("euler", &hyd)?;
            Ok(json!({ "experiment": name, "model": model.kind(), "times": v.snapshot_times, "mismatch": mismatch_json(&m) }))
        }
        EpsSweep => {
            let v = cfg.vlasov()?;
            let h = cfg.hydro()?;
            let model = cfg.model()?;
            let pressures = &cfg.eps_sweep.as_ref().expect("validated").pressures;
            let rep = eps_sweep(&vlasov_initial(cfg)?, &hydro_initial(cfg)?, model, v.dt, h.dt, &v.snapshot_times, pressures)?;
            let mut table = Table::new(["eps_p", "mismatch_mu", "mismatch_momentum", "mismatch"]);
            for r in &rep.rows {
                table.push(vec![
                    Cell::Real(r.eps_p),
                    Cell::Real(r.mismatch.mu),
                    Cell::Real(r.mismatch.momentum),
                    Cell::Real(r.mismatch.total()),
                ]);
            }
            out.table("eps_sweep.csv".into(), &table)?;
            Ok(json!({
                "experiment": name,
                "model": model.kind(),
                "pressures": rep.rows.iter().map(|r| r.eps_p).collect::<Vec<_>>(),
                "mismatch": rep.rows.iter().map(|r| r.mismatch.total()).collect::<Vec<_>>(),
                "argmin": rep.argmin,
                "interior_optimum": rep.interior_optimum,
            }))
        }
        RateStudy => {
            let model = cfg.model()?;
            let rep = rate_study(
                model,
                cfg.particles()?,
                cfg.integrator()?,
                cfg.phase_grid()?,
                cfg.vlasov()?.dt,
                cfg.rate_study.as_ref().expect("validated"),
            )?;
            let mut table = Table::new(["N", "distance", "corrected"]);
            for ((&n, &d), p) in rep.particle_counts.iter().zip(&rep.raw_distances).zip(&rep.pairs) {
                table.push(vec![n.into(), Cell::Real(d), Cell::Real(p.1)]);
            }
            out.table("rate_study.csv".into(), &table)?;
            Ok(json!({
                "experiment": name,
                "model": model.kind(),
                "t": rep.t,
                "pairs": rep.pairs,
                "alpha_hat": rep.fit.alpha_hat,
                "C_hat": rep.fit.c_hat,
                "residual": rep.fit.residual,
                "slope_std_error": rep.fit.slope_std_error,
                "noise_floor": rep.noise_floor,
                "raw_distances": rep.raw_distances,
                "estimator": rep.estimator,
            }))
        }
        KsLimit => {
            let s = cfg.ks_limit.as_ref().expect("validated");
            let rep = ks_limit(s)?;
            let mut table = Table::new(["eps", "l1"]);
            for &(e, d) in &rep.rows {
                table.push(vec![Cell::Real(e), Cell::Real(d)]);
            }
            out.table("ks_limit.csv".into(), &table)?;
            let mut cols = vec![("keller_segel", rep.reference.clone())];
            let names: Vec<String> = s.eps_values.iter().map(|e| format!("eps_{e}")).collect();
            for (n, mu) in names.iter().zip(&rep.densities) {
                cols.push((n.as_str(), mu.clone()));
            }
            out.fields("ks_limit_density", &rep.grid, &[(s.t_final, cols)])?;
            Ok(json!({
                "experiment": name,
                "t": s.t_final,
                "eps": s.eps_values,
                "l1": rep.rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            }))
        }
    }
}
