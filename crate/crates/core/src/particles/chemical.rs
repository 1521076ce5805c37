use crate::error::{Error, Result};
use crate::model::{Chemotaxis, ChemicalField};

/// Right-hand-side source of the chemical equation.
#[derive(Debug, Clone, Copy)]
pub enum ChemSource<'a> {
    None,
    /// Spatially uniform production rate.
    Uniform(f64),
    /// `(1/N) Σ_j χ(x - x_j)` over particle positions (particle-major, field dimension).
    Particles(&'a [f64]),
    /// Precomputed nodal source values.
    Nodal(&'a [f64]),
}

/// Explicit diffusion number `D Δt Σ_a 1/h_a² + κ Δt / 2`; the scheme keeps a
/// nonnegative field nonnegative while this stays at or below one half.
pub fn chemical_cfl(field: &ChemicalField, diffusivity: f64, kappa: f64, dt: f64) -> f64 {
    let inv_h2: f64 = (0..field.grid.dim()).map(|a| field.grid.spacing(a).powi(-2)).sum();
    diffusivity * dt * inv_h2 + 0.5 * kappa * dt
}

pub const CHEM_CFL_LIMIT: f64 = 0.5;

/// Nodal source values for a [`ChemSource`].
pub fn source_values(field: &ChemicalField, chem: &Chemotaxis, source: ChemSource<'_>) -> Result<Vec<f64>> {
    let n = field.grid.len();
    Ok(match source {
        ChemSource::None => vec![0.0; n],
        ChemSource::Uniform(c) => vec![c; n],
        ChemSource::Particles(x) => {
            let d = field.grid.dim();
            let count = x.len() / d;
            let mut s = vec![0.0; n];
            if count > 0 {
                field.deposit(&chem.chi(), x, 1.0 / count as f64, &mut s);
            }
            s
        }
        ChemSource::Nodal(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch { left: v.len(), right: n });
            }
            v.to_vec()
        }
    })
}

/// One explicit step of `∂_t φ = D Δφ - κ φ + S`.
pub fn step_chemical(
    field: &ChemicalField,
    source: ChemSource<'_>,
    chem: &Chemotaxis,
    dt: f64,
) -> Result<ChemicalField> {
    let s = source_values(field, chem, source)?;
    let mut out = field.clone();
    advance_chemical(&mut out, &s, chem.diffusivity, chem.kappa, dt, 1)?;
    Ok(out)
}

/// `substeps` explicit steps of size `dt` with a frozen nodal source.
pub(crate) fn advance_chemical(
    field: &mut ChemicalField,
    source: &[f64],
    diffusivity: f64,
    kappa: f64,
    dt: f64,
    substeps: usize,
) -> Result<()> {
    let cfl = chemical_cfl(field, diffusivity, kappa, dt);
    if cfl > CHEM_CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::Cfl { section: "chemistry", number: cfl, limit: CHEM_CFL_LIMIT });
    }
    let mut lap = vec![0.0; field.values.len()];
    for _ in 0..substeps {
        field.laplacian(&mut lap);
        for ((phi, l), s) in field.values.iter_mut().zip(&lap).zip(source) {
            *phi += dt * (diffusivity * l - kappa * *phi + s);
        }
    }
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "chemical field", step: 0 });
    }
    Ok(())
}
