//! Finite privacy mechanisms.
//!
//! A [`StochasticKernel`] is the row-stochastic matrix `K[d][w] = P(W = w | D = d)`
//! over integer-labelled inputs `0..n` and outputs `0..m`. A
//! [`DiscreteDistribution`] is a probability vector over the same kind of
//! label set. Both validate on construction and are immutable afterwards.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};
use crate::scalar::Scalar;
use crate::seed;

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return param(format!("duplicate {what} alias {l:?}"));
        }
    }
    Ok(())
}

fn check_probability_vector<S: Scalar>(mass: &[S], what: &str) -> Result<()> {
    if mass.is_empty() {
        return param(format!("{what}: empty support"));
    }
    let mut total = 0.0f64;
    for (i, &p) in mass.iter().enumerate() {
        let v = p.as_f64();
        if !(0.0..=1.0).contains(&v) {
            return param(format!("{what}: entry {i} = {v} outside [0, 1]"));
        }
        total += v;
    }
    if (total - 1.0).abs() > S::MASS_TOLERANCE {
        return param(format!("{what}: mass sums to {total}, expected 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<S: Scalar = f64> {
    mass: Vec<S>,
    aliases: Option<Vec<String>>,
}

impl<S: Scalar> DiscreteDistribution<S> {
    pub fn new(mass: Vec<S>) -> Result<Self> {
        check_probability_vector(&mass, "distribution")?;
        Ok(Self { mass, aliases: None })
    }

    /// Normalizes a nonnegative weight vector.
    pub fn from_weights(weights: &[S]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= S::zero()) || !w.is_finite()) {
            return param("weights must be finite and nonnegative");
        }
        let total: S = weights.iter().copied().sum();
        if total <= S::zero() {
            return param("weights sum to zero");
        }
        Self::new(weights.iter().map(|&w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return param("uniform distribution needs at least one label");
        }
        let p = S::one() / S::from_usize(n).unwrap();
        Ok(Self { mass: vec![p; n], aliases: None })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return param(format!("point mass at {at} outside support of size {n}"));
        }
        let mut mass = vec![S::zero(); n];
        mass[at] = S::one();
        Ok(Self { mass, aliases: None })
    }

    /// Draws from the flat Dirichlet over `n` labels; every entry is strictly positive.
    pub fn random_positive<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Self> {
        if n == 0 {
            return param("random distribution needs at least one label");
        }
        let w: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                e.max(1e-300)
            })
            .collect();
        let total: f64 = w.iter().sum();
        Self::new(w.iter().map(|x| S::lit(x / total)).collect())
    }

    pub fn with_aliases(mut self, aliases: Vec<String>) -> Result<Self> {
        if aliases.len() != self.mass.len() {
            return param("alias count does not match support size");
        }
        check_unique(&aliases, "label")?;
        self.aliases = Some(aliases);
        Ok(self)
    }

    pub fn aliases(&self) -> Option<&[String]> {
        self.aliases.as_deref()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    pub fn get(&self, label: usize) -> S {
        self.mass[label]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.mass.iter().all(|&p| p > S::zero())
    }

    pub fn digest(&self) -> String {
        digest_values(&[self.mass.len()], self.mass.iter().copied())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.mass.iter().map(|p| p.as_f64()).collect()
    }
}

pub(crate) fn digest_values<S: Scalar>(dims: &[usize], values: impl Iterator<Item = S>) -> String {
    let mut h = Sha256::new();
    for d in dims {
        h.update((*d as u64).to_le_bytes());
    }
    for v in values {
        h.update(v.as_f64().to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Row-stochastic matrix `K[d][w]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel<S: Scalar = f64> {
    n_inputs: usize,
    n_outputs: usize,
    entries: Vec<S>,
    input_aliases: Option<Vec<String>>,
    output_aliases: Option<Vec<String>>,
}

impl<S: Scalar> StochasticKernel<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self> {
        let n_inputs = rows.len();
        if n_inputs == 0 {
            return param("kernel needs at least one input");
        }
        let n_outputs = rows[0].len();
        if n_outputs == 0 {
            return param("kernel needs at least one output");
        }
        let mut entries = Vec::with_capacity(n_inputs * n_outputs);
        for (d, row) in rows.into_iter().enumerate() {
            if row.len() != n_outputs {
                return param(format!("row {d} has {} entries, expected {n_outputs}", row.len()));
            }
            check_probability_vector(&row, &format!("row {d}"))?;
            entries.extend(row);
        }
        Ok(Self { n_inputs, n_outputs, entries, input_aliases: None, output_aliases: None })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::randomized_response(n, 0.0)
    }

    /// k-ary randomized response: keep the true label with probability `1 - flip`,
    /// otherwise report one of the other `k - 1` labels uniformly.
    pub fn randomized_response(k: usize, flip: f64) -> Result<Self> {
        if k == 0 {
            return param("randomized response needs k >= 1");
        }
        let max_flip = (k as f64 - 1.0) / k as f64;
        if !(0.0..=max_flip).contains(&flip) {
            return param(format!("flip probability {flip} outside [0, {max_flip}] for k = {k}"));
        }
        let stay = S::one() - S::lit(flip);
        let other = if k > 1 { S::lit(flip) / S::from_usize(k - 1).unwrap() } else { S::zero() };
        let rows = (0..k)
            .map(|d| (0..k).map(|w| if w == d { stay } else { other }).collect())
            .collect();
        Self::new(rows)
    }

    /// Every input releases `target`; zero leakage reference.
    pub fn constant(n_inputs: usize, n_outputs: usize, target: usize) -> Result<Self> {
        if target >= n_outputs {
            return param(format!("target output {target} outside 0..{n_outputs}"));
        }
        let rows = (0..n_inputs)
            .map(|_| (0..n_outputs).map(|w| if w == target { S::one() } else { S::zero() }).collect())
            .collect();
        Self::new(rows)
    }

    /// Seeded random kernel with every entry at least `min_prob`.
    pub fn random(seed: u64, n_inputs: usize, n_outputs: usize, min_prob: f64) -> Result<Self> {
        let mut rng = seed::rng(seed);
        Self::random_with(&mut rng, n_inputs, n_outputs, min_prob)
    }

    pub fn random_with<R: Rng + ?Sized>(
        rng: &mut R,
        n_inputs: usize,
        n_outputs: usize,
        min_prob: f64,
    ) -> Result<Self> {
        if n_inputs == 0 || n_outputs == 0 {
            return param("kernel needs at least one input and one output");
        }
        if !(min_prob >= 0.0) || min_prob * n_outputs as f64 > 1.0 {
            return param(format!(
                "min_prob {min_prob} infeasible for {n_outputs} outputs (need min_prob * outputs <= 1)"
            ));
        }
        let free = 1.0 - min_prob * n_outputs as f64;
        let rows = (0..n_inputs)
            .map(|_| {
                let w: Vec<f64> = (0..n_outputs).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| min_prob + free * x / total).collect();
                // absorb rounding into the largest entry
                let err = 1.0 - row.iter().sum::<f64>();
                let imax = argmax(&row);
                row[imax] += err;
                row.into_iter().map(S::lit).collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn with_aliases(mut self, inputs: Option<Vec<String>>, outputs: Option<Vec<String>>) -> Result<Self> {
        if let Some(a) = &inputs {
            if a.len() != self.n_inputs {
                return param("input alias count mismatch");
            }
            check_unique(a, "input")?;
        }
        if let Some(a) = &outputs {
            if a.len() != self.n_outputs {
                return param("output alias count mismatch");
            }
            check_unique(a, "output")?;
        }
        self.input_aliases = inputs;
        self.output_aliases = outputs;
        Ok(self)
    }

    pub fn input_aliases(&self) -> Option<&[String]> {
        self.input_aliases.as_deref()
    }

    pub fn output_aliases(&self) -> Option<&[String]> {
        self.output_aliases.as_deref()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    #[inline]
    pub fn entry(&self, input: usize, output: usize) -> S {
        self.entries[input * self.n_outputs + output]
    }

    pub fn row(&self, input: usize) -> &[S] {
        &self.entries[input * self.n_outputs..(input + 1) * self.n_outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.entries.chunks(self.n_outputs)
    }

    pub fn has_zero_entries(&self) -> bool {
        self.entries.iter().any(|&p| p == S::zero())
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.iter().map(|p| p.as_f64()).collect()).collect()
    }

    pub fn digest(&self) -> String {
        digest_values(&[self.n_inputs, self.n_outputs], self.entries.iter().copied())
    }

    /// Draws an output label from row `input`.
    pub fn sample<R: Rng + ?Sized>(&self, input: usize, rng: &mut R) -> Result<usize> {
        if input >= self.n_inputs {
            return Err(Error::Parameter(format!(
                "unknown input label {input} (kernel has {} inputs)",
                self.n_inputs
            )));
        }
        let u: f64 = rng.random();
        let row = self.row(input);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (w, p) in row.iter().enumerate() {
            let p = p.as_f64();
            if p > 0.0 {
                last_positive = w;
                acc += p;
                if u < acc {
                    return Ok(w);
                }
            }
        }
        Ok(last_positive)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
