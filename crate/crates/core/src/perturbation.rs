//! Gradient-space distortion `δ` with `‖δ‖ = Δ`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// `δ = Δ · direction / ‖direction‖`.
    FixedDirection { direction: Vec<f64> },
    /// `δ = Δ · u` with `u` uniform on the unit sphere, drawn from `seed`.
    IsotropicRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPerturbation {
    #[serde(flatten)]
    pub mode: PerturbationMode,
    pub magnitude: f64,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl GradientPerturbation {
    pub fn none() -> Self {
        Self { mode: PerturbationMode::FixedDirection { direction: vec![1.0] }, magnitude: 0.0 }
    }

    pub fn fixed(direction: Vec<f64>, magnitude: f64) -> Result<Self> {
        let p = Self { mode: PerturbationMode::FixedDirection { direction }, magnitude };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(seed: u64, magnitude: f64) -> Result<Self> {
        let p = Self { mode: PerturbationMode::IsotropicRandom { seed }, magnitude };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return param(format!("perturbation magnitude {} must be finite and >= 0", self.magnitude));
        }
        if let PerturbationMode::FixedDirection { direction } = &self.mode {
            if self.magnitude > 0.0 && norm(direction) <= 0.0 {
                return param("fixed perturbation direction must be nonzero");
            }
        }
        Ok(())
    }

    /// The perturbation vector in a gradient space of dimension `dim`.
    pub fn vector(&self, dim: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if self.magnitude == 0.0 {
            return Ok(vec![0.0; dim]);
        }
        let unit = match &self.mode {
            PerturbationMode::FixedDirection { direction } => {
                if direction.len() != dim {
                    return param(format!("direction has {} components, gradient has {dim}", direction.len()));
                }
                let n = norm(direction);
                direction.iter().map(|x| x / n).collect()
            }
            PerturbationMode::IsotropicRandom { seed } => random_unit(&mut seed::rng(*seed), dim),
        };
        Ok(unit.into_iter().map(|u| u * self.magnitude).collect())
    }
}
