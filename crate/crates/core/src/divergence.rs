//! Divergences between discrete distributions (natural log).
//!
//! The slice functions accept any nonnegative vectors, which is how the
//! C1 error analysis evaluates JS on perturbed, unnormalized estimates. The
//! [`DiscreteDistribution`] wrappers check that supports agree.

use crate::error::{Error, Result};
use crate::mechanism::DiscreteDistribution;
use crate::scalar::{xlogx_over, Scalar};

fn same_len<S: Scalar>(p: &[S], q: &[S]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch { left: p.len(), right: q.len() });
    }
    Ok(())
}

/// `sum p ln(p/q)`; `+inf` when `p` puts mass where `q` has none.
pub fn kl_slices<S: Scalar>(p: &[S], q: &[S]) -> S {
    p.iter().zip(q).map(|(&a, &b)| xlogx_over(a, b)).sum()
}

/// Half the L1 distance.
pub fn tv_slices<S: Scalar>(p: &[S], q: &[S]) -> S {
    let half = S::lit(0.5);
    half * p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum::<S>()
}

/// `(1+d) ln(1+d) + (1−d) ln(1−d)` for `d ∈ [−1, 1]`, by series near zero.
fn js_kernel<S: Scalar>(d: S) -> S {
    let d = d.abs().min(S::one());
    if d < S::lit(0.01) {
        // Σ_k d^{2k} / (k (2k − 1))
        let d2 = d * d;
        let mut pow = d2;
        let mut sum = S::zero();
        for k in 1..=6 {
            sum = sum + pow / S::lit((k * (2 * k - 1)) as f64);
            pow = pow * d2;
        }
        return sum;
    }
    let hi = (S::one() + d) * d.ln_1p();
    let lo = if d < S::one() { (S::one() - d) * (-d).ln_1p() } else { S::zero() };
    hi + lo
}

/// `½ KL(p‖m) + ½ KL(q‖m)` with `m = ½(p + q)`.
///
/// Evaluated per coordinate as `(a + b) h(d) / 4` with `d = (a − b)/(a + b)`,
/// which stays at `O(d²)` instead of rounding noise when `p ≈ q`.
pub fn js_slices<S: Scalar>(p: &[S], q: &[S]) -> S {
    let quarter = S::lit(0.25);
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let s = a + b;
            if s <= S::zero() {
                S::zero()
            } else {
                quarter * s * js_kernel((a - b) / s)
            }
        })
        .sum()
}

pub fn kl_divergence<S: Scalar>(p: &DiscreteDistribution<S>, q: &DiscreteDistribution<S>) -> Result<S> {
    same_len(p.mass(), q.mass())?;
    Ok(kl_slices(p.mass(), q.mass()))
}

pub fn tv_distance<S: Scalar>(p: &DiscreteDistribution<S>, q: &DiscreteDistribution<S>) -> Result<S> {
    same_len(p.mass(), q.mass())?;
    Ok(tv_slices(p.mass(), q.mass()).min(S::one()))
}

pub fn js_divergence<S: Scalar>(p: &DiscreteDistribution<S>, q: &DiscreteDistribution<S>) -> Result<S> {
    same_len(p.mass(), q.mass())?;
    Ok(js_slices(p.mass(), q.mass()).min(S::LN_2()))
}
