//! Analytic learning tasks whose per-sample gradient map `g(x) = ∇_θ L(θ, x)`
//! the attacker tries to invert.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::perturbation::norm;

/// Axis-aligned box holding the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DataDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return param("domain bounds must be nonempty and of equal length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return param("domain needs finite bounds with lower < upper");
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Length of the box diagonal: the largest distance between two points.
    pub fn diagonal(&self) -> f64 {
        let d: Vec<f64> = self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect();
        norm(&d)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..=*u)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossFamily {
    /// `L(θ, x) = ½‖θ − x‖²`, `g(x) = θ − x`.
    Translation,
    /// `L(θ, (x, y)) = ½(θ·x − y)²`, `g(x) = (θ·x − y) x`.
    LinearRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionTask {
    pub family: LossFamily,
    pub theta: Vec<f64>,
    pub domain: DataDomain,
    /// The distance bound `D`; at least the domain diagonal.
    pub diameter: f64,
    /// Regression labels, one per sample or a single shared value.
    #[serde(default)]
    pub labels: Vec<f64>,
}

impl ReconstructionTask {
    pub fn translation(theta: Vec<f64>, domain: DataDomain) -> Result<Self> {
        let diameter = domain.diagonal();
        Self { family: LossFamily::Translation, theta, domain, diameter, labels: Vec::new() }.validated()
    }

    pub fn linear_regression(theta: Vec<f64>, labels: Vec<f64>, domain: DataDomain) -> Result<Self> {
        let diameter = domain.diagonal();
        Self { family: LossFamily::LinearRegression, theta, domain, diameter, labels }.validated()
    }

    pub fn with_diameter(mut self, diameter: f64) -> Result<Self> {
        self.diameter = diameter;
        self.validated()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self { theta, ..self.clone() }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.theta.len() != self.domain.dim() {
            return param(format!("theta has {} components, data has {}", self.theta.len(), self.domain.dim()));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return param("theta must be finite");
        }
        if !(self.diameter >= self.domain.diagonal() * (1.0 - 1e-12)) || !self.diameter.is_finite() {
            return param(format!("diameter {} is below the domain diagonal {}", self.diameter, self.domain.diagonal()));
        }
        if self.family == LossFamily::LinearRegression && self.labels.is_empty() {
            return param("linear regression needs labels");
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn label(&self, sample: usize) -> f64 {
        match self.labels.len() {
            0 => 0.0,
            1 => self.labels[0],
            n => self.labels[sample % n],
        }
    }

    fn residual(&self, x: &[f64], sample: usize) -> f64 {
        dot(&self.theta, x) - self.label(sample)
    }

    pub fn loss(&self, x: &[f64], sample: usize) -> f64 {
        match self.family {
            LossFamily::Translation => {
                0.5 * self.theta.iter().zip(x).map(|(t, v)| (t - v) * (t - v)).sum::<f64>()
            }
            LossFamily::LinearRegression => 0.5 * self.residual(x, sample).powi(2),
        }
    }

    /// Per-sample gradient with respect to `θ`.
    pub fn gradient(&self, x: &[f64], sample: usize) -> Vec<f64> {
        match self.family {
            LossFamily::Translation => self.theta.iter().zip(x).map(|(t, v)| t - v).collect(),
            LossFamily::LinearRegression => {
                let r = self.residual(x, sample);
                x.iter().map(|v| r * v).collect()
            }
        }
    }

    /// Gradient in `x` of `½‖g(x) − target‖²`, i.e. `J(x)ᵀ (g(x) − target)`.
    pub fn matching_gradient(&self, x: &[f64], sample: usize, target: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = self.gradient(x, sample).iter().zip(target).map(|(g, t)| g - t).collect();
        match self.family {
            LossFamily::Translation => diff.iter().map(|v| -v).collect(),
            LossFamily::LinearRegression => {
                // J = r I + x θᵀ
                let r = self.residual(x, sample);
                let xd = dot(x, &diff);
                diff.iter().zip(&self.theta).map(|(d, t)| r * d + t * xd).collect()
            }
        }
    }

    /// Preimage of a gradient, when the map is invertible.
    ///
    /// Translation inverts everywhere (`x = θ − g`). One-dimensional regression
    /// solves `θx² − yx − g = 0` and keeps the root inside the domain.
    pub fn invert(&self, grad: &[f64], sample: usize) -> Option<Vec<f64>> {
        match self.family {
            LossFamily::Translation => Some(self.theta.iter().zip(grad).map(|(t, g)| t - g).collect()),
            LossFamily::LinearRegression if self.dim() == 1 => {
                let (a, y, g) = (self.theta[0], self.label(sample), grad[0]);
                let (lo, hi) = (self.domain.lower[0], self.domain.upper[0]);
                let roots: Vec<f64> = if a == 0.0 {
                    if y == 0.0 {
                        return None;
                    }
                    vec![-g / y]
                } else {
                    let disc = y * y + 4.0 * a * g;
                    if disc < 0.0 {
                        return None;
                    }
                    let s = disc.sqrt();
                    vec![(y + s) / (2.0 * a), (y - s) / (2.0 * a)]
                };
                let tol = 1e-12 * (hi - lo);
                roots.into_iter().find(|x| *x >= lo - tol && *x <= hi + tol).map(|x| vec![x.clamp(lo, hi)])
            }
            LossFamily::LinearRegression => None,
        }
    }

    /// Analytic upper bound on the Lipschitz constant of `g` over the domain.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.family {
            LossFamily::Translation => 1.0,
            LossFamily::LinearRegression => {
                // ‖J‖ ≤ |θ·x − y| + ‖x‖‖θ‖
                let (lo_dot, hi_dot) = self.dot_range();
                let max_label_gap = self.labels
                    .iter()
                    .map(|y| (hi_dot - y).abs().max((lo_dot - y).abs()))
                    .fold(0.0, f64::max);
                let max_x: Vec<f64> = self.domain.lower.iter().zip(&self.domain.upper).map(|(l, u)| l.abs().max(u.abs())).collect();
                max_label_gap + norm(&max_x) * norm(&self.theta)
            }
        }
    }

    fn dot_range(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (t, (l, u)) in self.theta.iter().zip(self.domain.lower.iter().zip(&self.domain.upper)) {
            let (a, b) = (t * l, t * u);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }

    /// Exact bi-Lipschitz constants `(c_a, c_b)` where known analytically.
    pub fn exact_bilipschitz(&self) -> Option<(f64, f64)> {
        match self.family {
            LossFamily::Translation => Some((1.0, 1.0)),
            LossFamily::LinearRegression => None,
        }
    }

    /// `(c_a, c_b)`: exact where available, else min/max of
    /// `‖g(x) − g(x′)‖ / ‖x − x′‖` over `pairs` random pairs per label.
    pub fn bilipschitz<R: Rng + ?Sized>(&self, rng: &mut R, pairs: usize) -> (f64, f64) {
        if let Some(c) = self.exact_bilipschitz() {
            return c;
        }
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for sample in 0..self.labels.len().max(1) {
            for _ in 0..pairs {
                let (a, b) = (self.domain.sample(rng), self.domain.sample(rng));
                let dx = distance(&a, &b);
                if dx < 1e-12 {
                    continue;
                }
                let ratio = distance(&self.gradient(&a, sample), &self.gradient(&b, sample)) / dx;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn regression() -> ReconstructionTask {
        ReconstructionTask::linear_regression(vec![1.0], vec![-2.0], DataDomain::unit(1)).unwrap()
    }

    #[test]
    fn translation_gradient_and_inverse() {
        let t = ReconstructionTask::translation(vec![0.5, 0.5], DataDomain::unit(2)).unwrap();
        assert!((t.diameter - 2f64.sqrt()).abs() < 1e-15);
        let g = t.gradient(&[0.2, 0.9], 0);
        assert_eq!(g, vec![0.3, 0.5 - 0.9]);
        let x = t.invert(&g, 0).unwrap();
        assert!(distance(&x, &[0.2, 0.9]) < 1e-15);
        assert_eq!(t.exact_bilipschitz(), Some((1.0, 1.0)));
    }

    #[test]
    fn regression_inverse_is_closed_form_root() {
        let t = regression();
        for x in [0.0, 0.13, 0.5, 0.999, 1.0] {
            let g = t.gradient(&[x], 0);
            assert!((g[0] - (x * x + 2.0 * x)).abs() < 1e-15);
            assert!((t.invert(&g, 0).unwrap()[0] - x).abs() < 1e-12);
        }
        assert!(t.invert(&[5.0], 0).is_none());
    }

    #[test]
    fn matching_gradient_matches_finite_difference() {
        let t = ReconstructionTask::linear_regression(vec![0.7, -0.4], vec![0.3], DataDomain::unit(2)).unwrap();
        let target = vec![0.1, 0.2];
        let x = vec![0.35, 0.6];
        let f = |x: &[f64]| {
            let g = t.gradient(x, 0);
            0.5 * g.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let an = t.matching_gradient(&x, 0, &target);
        for i in 0..2 {
            let h = 1e-6;
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            assert!((an[i] - (f(&up) - f(&dn)) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn sampled_constants_within_analytic_range() {
        let t = regression();
        let (ca, cb) = t.bilipschitz(&mut seed::rng(1), 20_000);
        // g'(x) = 2x + 2 on [0, 1]
        assert!(ca >= 2.0 - 1e-9 && ca < 2.05);
        assert!(cb <= 4.0 + 1e-9 && cb > 3.95);
        assert_eq!(t.lipschitz_bound(), 4.0);
    }

    #[test]
    fn validation() {
        assert!(ReconstructionTask::translation(vec![0.0], DataDomain::unit(2)).is_err());
        let t = ReconstructionTask::translation(vec![0.0], DataDomain::unit(1)).unwrap();
        assert!(t.clone().with_diameter(0.5).is_err());
        assert!(t.with_diameter(2.0).is_ok());
        assert!(ReconstructionTask::linear_regression(vec![1.0], vec![], DataDomain::unit(1)).is_err());
        assert!(DataDomain::new(vec![1.0], vec![0.0]).is_err());
    }
}
