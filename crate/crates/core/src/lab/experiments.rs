use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, KsLimitSection, ParticlesSection, RateStudySection, VlasovInitial};
use super::profile::Profile;
use crate::error::{Error, Result};
use crate::hydro::{
    keller_segel_eps_model, monokinetic_init, solve_potential, step_euler, step_euler_eps, step_keller_segel,
    HydroGrid, HydroParams, HydroState, KellerSegel,
};
use crate::kinetic::{moments, step_vlasov, KineticState, PhaseDensity, PhaseGrid};
use crate::model::{ChemicalField, ModelSpec};
use crate::particles::{run_replicas, IntegratorConfig};
use crate::transport::{
    extract_marginal, fit_rate, subtract_noise_floor, vlasov_reference_measure, wasserstein, Estimator, RateFitResult,
};

/// Number and length of equal steps covering `span` with steps no longer
/// than `dt`.
pub(crate) fn equal_steps(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, 0.0);
    }
    let k = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (k, span / k as f64)
}

/// Generic driver: advances `state` through each snapshot time.
fn snapshots<S: Clone>(
    mut state: S,
    times: &[f64],
    dt: f64,
    mut step: impl FnMut(&S, f64) -> Result<S>,
) -> Result<Vec<S>> {
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let (k, h) = equal_steps(target - t, dt);
        for _ in 0..k {
            state = step(&state, h)?;
        }
        t = target;
        out.push(state.clone());
    }
    Ok(out)
}

pub fn vlasov_snapshots(init: &KineticState, model: &ModelSpec, dt: f64, times: &[f64]) -> Result<Vec<KineticState>> {
    snapshots(init.clone(), times, dt, |s, h| step_vlasov(s, model, h))
}

/// Euler snapshots; `eps_scaled` selects the friction-scaled system with
/// `ε = state.params.eps`.
pub fn euler_snapshots(
    init: &HydroState,
    model: &ModelSpec,
    dt: f64,
    times: &[f64],
    eps_scaled: bool,
) -> Result<Vec<HydroState>> {
    snapshots(init.clone(), times, dt, |s, h| if eps_scaled { step_euler_eps(s, model, h) } else { step_euler(s, model, h) })
}

/// Keller-Segel snapshots as `(μ, ψ)` pairs.
pub fn keller_segel_snapshots(
    grid: &HydroGrid,
    mu0: &[f64],
    ks: &KellerSegel,
    dt: f64,
    times: &[f64],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let psi0 = solve_potential(grid, mu0, ks)?;
    snapshots((mu0.to_vec(), psi0), times, dt, |s, h| step_keller_segel(grid, &s.0, ks, h))
}

fn chem_on(grid: &HydroGrid, profile: Option<&Profile>) -> Result<ChemicalField> {
    let fg = grid.field_grid()?;
    Ok(match profile {
        Some(p) => ChemicalField::from_fn(fg, |x| p.eval(x[0])),
        None => ChemicalField::zeros(fg),
    })
}

/// Initial Vlasov state described by `[phase_grid]` and `[vlasov]`.
pub fn vlasov_initial(cfg: &ExperimentConfig) -> Result<KineticState> {
    let grid = cfg.phase_grid()?.clone();
    let v = cfg.vlasov()?;
    let rho = match &v.initial {
        VlasovInitial::ParticleLaw => PhaseDensity::from_law(grid.clone(), &cfg.particles()?.initial_law)?,
        VlasovInitial::Law { law } => PhaseDensity::from_law(grid.clone(), law)?,
        VlasovInitial::Monokinetic { density, velocity, sigma_v } => {
            let xs = grid.xs();
            monokinetic_init(grid.clone(), &density.sample(&xs), &velocity.sample(&xs), *sigma_v)?
        }
    };
    let mut state = KineticState::new(rho);
    if cfg.model()?.chemistry().is_some() {
        state = state.with_chem(chem_on(&HydroGrid::of_phase(&grid), v.chemical_initial.as_ref())?)?;
    }
    Ok(state)
}

/// Initial Euler state from `[hydro.initial]`, or from the monokinetic
/// Vlasov data when that section is absent.
pub fn hydro_initial(cfg: &ExperimentConfig) -> Result<HydroState> {
    let h = cfg.hydro()?;
    let grid = cfg.hydro_grid()?;
    let (density, velocity) = match (&h.initial, cfg.vlasov.as_ref().map(|v| &v.initial)) {
        (Some(i), _) => (i.density, i.velocity),
        (None, Some(VlasovInitial::Monokinetic { density, velocity, .. })) => (*density, *velocity),
        _ => return Err(Error::Config("[hydro.initial] is required".into())),
    };
    let xs = grid.xs();
    let mut s = HydroState::new(grid.clone(), density.sample(&xs), &velocity.sample(&xs))?.with_params(h.params);
    if cfg.model()?.chemistry().is_some() {
        s = s.with_psi(chem_on(&grid, h.chemical_initial.as_ref())?)?;
    }
    Ok(s)
}

fn l1(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

/// Trapezoid average of samples at `times`; a single sample is returned as is.
fn time_average(times: &[f64], values: &[f64]) -> f64 {
    let span = times.last().unwrap() - times[0];
    if times.len() < 2 || span <= 0.0 {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    acc / span
}

/// Time-averaged `L¹` distance between Vlasov and Euler moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mismatch {
    pub mu: f64,
    pub momentum: f64,
    /// Time-averaged `‖μ‖₁` and `‖μu‖₁` of the Euler solution.
    pub mu_norm: f64,
    pub momentum_norm: f64,
}

impl Mismatch {
    pub fn mu_relative(&self) -> f64 {
        self.mu / self.mu_norm
    }

    pub fn momentum_relative(&self) -> f64 {
        self.momentum / self.momentum_norm
    }

    pub fn total(&self) -> f64 {
        self.mu + self.momentum
    }
}

/// Per-time moment differences between matched Vlasov and Euler runs.
pub fn moment_mismatch(times: &[f64], kin: &[KineticState], hyd: &[HydroState]) -> Result<Mismatch> {
    if kin.len() != times.len() || hyd.len() != times.len() || times.is_empty() {
        return Err(Error::DimensionMismatch { left: kin.len().min(hyd.len()), right: times.len() });
    }
    let dx = hyd[0].grid.dx();
    let mut cols = [vec![], vec![], vec![], vec![]];
    for (k, h) in kin.iter().zip(hyd) {
        let m = moments(&k.density);
        if m.mu.len() != h.mu.len() {
            return Err(Error::DimensionMismatch { left: m.mu.len(), right: h.mu.len() });
        }
        let zero = vec![0.0; h.mu.len()];
        cols[0].push(l1(&m.mu, &h.mu, dx));
        cols[1].push(l1(&m.momentum, &h.q, dx));
        cols[2].push(l1(&h.mu, &zero, dx));
        cols[3].push(l1(&h.q, &zero, dx));
    }
    Ok(Mismatch {
        mu: time_average(times, &cols[0]),
        momentum: time_average(times, &cols[1]),
        mu_norm: time_average(times, &cols[2]),
        momentum_norm: time_average(times, &cols[3]),
    })
}

/// Vlasov and Euler from matched initial data, compared at `times`.
pub fn compare_ve(
    kinetic: &KineticState,
    hydro: &HydroState,
    model: &ModelSpec,
    vlasov_dt: f64,
    euler_dt: f64,
    times: &[f64],
) -> Result<(Mismatch, Vec<KineticState>, Vec<HydroState>)> {
    let kin = vlasov_snapshots(kinetic, model, vlasov_dt, times)?;
    let hyd = euler_snapshots(hydro, model, euler_dt, times, false)?;
    Ok((moment_mismatch(times, &kin, &hyd)?, kin, hyd))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps_p: f64,
    pub mismatch: Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Pressure with the smallest total mismatch.
    pub argmin: f64,
    /// True when the minimum is attained strictly inside the sweep range.
    pub interior_optimum: bool,
}

/// Removes repeated values, keeping first occurrences.
pub fn dedup_pressures(pressures: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(pressures.len());
    for &p in pressures {
        if out.contains(&p) {
            warn!("eps_sweep: dropping duplicate pressure {p}");
        } else {
            out.push(p);
        }
    }
    out
}

/// Runs Vlasov once and Euler once per pressure coefficient.
pub fn eps_sweep(
    kinetic: &KineticState,
    hydro: &HydroState,
    model: &ModelSpec,
    vlasov_dt: f64,
    euler_dt: f64,
    times: &[f64],
    pressures: &[f64],
) -> Result<SweepReport> {
    let pressures = dedup_pressures(pressures);
    let kin = vlasov_snapshots(kinetic, model, vlasov_dt, times)?;
    let rows: Vec<Result<SweepRow>> = pressures
        .par_iter()
        .map(|&eps_p| {
            let init = hydro.clone().with_params(HydroParams { pressure: eps_p, ..hydro.params });
            euler_snapshots(&init, model, euler_dt, times, false)
                .and_then(|hyd| moment_mismatch(times, &kin, &hyd))
                .map(|mismatch| SweepRow { eps_p, mismatch })
                .map_err(|e| Error::SweepPoint { eps_p, source: Box::new(e) })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let best = (0..rows.len())
        .min_by(|&a, &b| rows[a].mismatch.total().total_cmp(&rows[b].mismatch.total()))
        .expect("at least one pressure");
    let lo = rows.iter().map(|r| r.eps_p).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.eps_p).fold(f64::NEG_INFINITY, f64::max);
    let argmin = rows[best].eps_p;
    Ok(SweepReport { interior_optimum: argmin > lo && argmin < hi, argmin, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStudyReport {
    pub t: f64,
    pub particle_counts: Vec<usize>,
    /// Distance at time `t` for each particle count.
    pub raw_distances: Vec<f64>,
    /// Distance at `t = 0`, shared by every count.
    pub noise_floor: f64,
    /// Pairs handed to the fit.
    pub pairs: Vec<(f64, f64)>,
    pub estimator: Estimator,
    pub fit: RateFitResult,
}

/// `W2` between the first-particle marginal and the quantized Vlasov
/// solution at time `study.t`, for each particle count, fitted against `N`.
///
/// Particle `i` of replica `r` starts from the same state for every count,
/// so the initial marginal, and with it the noise floor, is shared.
pub fn rate_study(
    model: &ModelSpec,
    particles: &ParticlesSection,
    integrator: &IntegratorConfig,
    grid: &PhaseGrid,
    vlasov_dt: f64,
    study: &RateStudySection,
) -> Result<RateStudyReport> {
    let times = [0.0, study.t];
    let rho0 = KineticState::new(PhaseDensity::from_law(grid.clone(), &particles.initial_law)?);
    let kin = vlasov_snapshots(&rho0, model, vlasov_dt, &times)?;
    let ref0 = vlasov_reference_measure(&kin[0].density, study.quantization)?;
    let ref_t = vlasov_reference_measure(&kin[1].density, study.quantization)?;
    info!("rate study: reference measures with {} and {} atoms", ref0.len(), ref_t.len());

    let mut raw = Vec::with_capacity(study.particle_counts.len());
    let mut floor = None;
    let mut estimator = Estimator::Quantile;
    for &n in &study.particle_counts {
        let plan = particles.plan(n)?;
        let run = run_replicas(&plan, model, integrator, &times)?;
        if floor.is_none() {
            let m0 = extract_marginal(&run, 0, 1, model.kind())?;
            floor = Some(wasserstein(&m0, &ref0, 2, study.solver)?.value);
        }
        let m = extract_marginal(&run, 1, 1, model.kind())?;
        let d = wasserstein(&m, &ref_t, 2, study.solver)?;
        estimator = d.estimator;
        info!("rate study: N = {n}, W2 = {:.6e}", d.value);
        raw.push(d.value);
    }
    let floor = floor.expect("at least one count");
    let pairs: Vec<(f64, f64)> = study
        .particle_counts
        .iter()
        .zip(&raw)
        .map(|(&n, &d)| (n as f64, if study.subtract_floor { subtract_noise_floor(d, floor) } else { d }))
        .collect();
    let fit = fit_rate(&pairs).map_err(|e| Error::RateFit(e.to_string()))?;
    Ok(RateStudyReport {
        t: study.t,
        particle_counts: study.particle_counts.clone(),
        raw_distances: raw,
        noise_floor: floor,
        pairs,
        estimator,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsLimitReport {
    pub grid: HydroGrid,
    /// Keller-Segel density at the final time.
    pub reference: Vec<f64>,
    /// `(ε, ‖μ_ε − μ_KS‖₁)` in the order given.
    pub rows: Vec<(f64, f64)>,
    /// Final Euler densities, one per `ε`.
    pub densities: Vec<Vec<f64>>,
}

/// Friction-scaled Euler runs for each `ε` against the Keller-Segel solution
/// at `t_final`. Chemical potentials start from the elliptic solution of the
/// initial density.
pub fn ks_limit(s: &KsLimitSection) -> Result<KsLimitReport> {
    let ks = KellerSegel { eta: s.eta, kappa: s.kappa, diffusivity: s.diffusivity, drift: Default::default() };
    let xs = s.grid.xs();
    let init = HydroState::new(s.grid.clone(), s.initial_density.sample(&xs), &vec![0.0; xs.len()])?;
    let times = [s.t_final];
    let reference = keller_segel_snapshots(&s.grid, &init.mu, &ks, s.dt, &times)?.pop().expect("one snapshot").0;
    let psi0 = solve_potential(&s.grid, &init.mu, &ks)?;
    let dx = s.grid.dx();
    let runs: Vec<Result<Vec<f64>>> = s
        .eps_values
        .par_iter()
        .map(|&eps| {
            let model = keller_segel_eps_model(eps, s.eta, s.kappa, s.diffusivity);
            let state = init
                .clone()
                .with_params(HydroParams { eps, pressure: 0.0, convection: s.convection })
                .with_psi(ChemicalField { grid: s.grid.field_grid()?, values: psi0.clone() })?;
            Ok(euler_snapshots(&state, &model, s.dt, &times, true)?.pop().expect("one snapshot").mu)
        })
        .collect();
    let densities = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = s.eps_values.iter().zip(&densities).map(|(&e, mu)| (e, l1(mu, &reference, dx))).collect();
    Ok(KsLimitReport { grid: s.grid.clone(), reference, rows, densities })
}
