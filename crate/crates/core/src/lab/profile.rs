use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional initial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `background + amplitude · exp(-(x - center)² / (2 width²))`
    Gaussian {
        #[serde(rename = "center_length", default)]
        center: f64,
        #[serde(rename = "width_length")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        background: f64,
    },
    /// `mean + amplitude · cos(wavenumber · x + phase)`
    Cosine {
        #[serde(default)]
        mean: f64,
        amplitude: f64,
        #[serde(rename = "wavenumber_per_length")]
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian { center, width, amplitude, background } => {
                let z = (x - center) / width;
                background + amplitude * (-0.5 * z * z).exp()
            }
            Profile::Cosine { mean, amplitude, wavenumber, phase } => mean + amplitude * (wavenumber * x + phase).cos(),
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            Profile::Constant { value } => value.is_finite(),
            Profile::Gaussian { center, width, amplitude, background } => {
                if !(width > 0.0) {
                    return Err(Error::invalid("width_length", "must be > 0"));
                }
                [center, width, amplitude, background].iter().all(|v| v.is_finite())
            }
            Profile::Cosine { mean, amplitude, wavenumber, phase } => {
                [mean, amplitude, wavenumber, phase].iter().all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("profile", "parameters must be finite"))
        }
    }

    /// Checks that the profile is a usable density on the given nodes.
    pub fn validate_density(&self, xs: &[f64]) -> Result<()> {
        self.validate()?;
        let v = self.sample(xs);
        if v.iter().any(|m| *m < 0.0) || v.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("density", "profile must be nonnegative with positive mass"));
        }
        Ok(())
    }
}
