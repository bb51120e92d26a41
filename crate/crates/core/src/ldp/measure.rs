//! Probability measures on a truncated state space and the functionals the
//! rate problem is built from.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, xlogx_over, Real};

use super::state::{StateSpace, DIRECT_KERNEL_STATES};

/// Weights over the states of a [`StateSpace`], next to its reference `nu`.
#[derive(Debug, Clone)]
pub struct TruncatedMeasure<T> {
    space: Arc<StateSpace<T>>,
    weights: Vec<T>,
}

impl<T: Real> TruncatedMeasure<T> {
    /// Wrap weights after checking shape, signs and total mass.
    pub fn new(space: Arc<StateSpace<T>>, weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::domain(format!(
                "{} weights for a space of {} states",
                weights.len(),
                space.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let total = compensated_sum(weights.iter().copied());
        let tol = T::lit(1e-12).max(T::epsilon() * T::of_u64(weights.len() as u64));
        if (total - T::one()).abs() > tol {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { space, weights })
    }

    /// Normalise arbitrary nonnegative mass into a probability measure.
    pub fn from_mass(space: Arc<StateSpace<T>>, mut mass: Vec<T>) -> Result<Self> {
        let total = compensated_sum(mass.iter().copied());
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::domain("mass must be finite with positive total"));
        }
        mass.iter_mut().for_each(|w| *w = *w / total);
        Self::new(space, mass)
    }

    pub fn reference_measure(space: Arc<StateSpace<T>>) -> Self {
        let weights = space.reference().to_vec();
        Self { space, weights }
    }

    pub fn point_mass(space: Arc<StateSpace<T>>, state: usize) -> Result<Self> {
        if state >= space.len() {
            return Err(Error::domain(format!("state {state} out of range")));
        }
        let mut weights = vec![T::zero(); space.len()];
        weights[state] = T::one();
        Ok(Self { space, weights })
    }

    pub fn space(&self) -> &Arc<StateSpace<T>> {
        &self.space
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn reference(&self) -> &[T] {
        self.space.reference()
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }
}

/// `S(x) = sum_{b subset of x} w(b)` in place, `k` bit planes.
pub fn subset_sum_transform<T: Real>(w: &mut [T], k: usize) {
    debug_assert_eq!(w.len(), 1 << k);
    for i in 0..k {
        let bit = 1usize << i;
        for chunk in w.chunks_mut(bit << 1) {
            let (lo, hi) = chunk.split_at_mut(bit);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h = *h + *l;
            }
        }
    }
}

/// `G(a) = sum_b kernel(a, b) w(b)` for every state `a`.
pub fn kernel_sums<T: Real>(space: &StateSpace<T>, w: &[T]) -> Vec<T> {
    let n = space.len();
    let k = space.tail_len();
    let width = 1usize << k;
    let mask = width - 1;
    if space.blocks() > 1 && n < DIRECT_KERNEL_STATES {
        return (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| space.kernel(a, b))
                    .fold(T::zero(), |acc, b| acc + w[b])
            })
            .collect();
    }
    let blocks = space.blocks();
    let mut zeta = w.to_vec();
    for block in zeta.chunks_mut(width) {
        subset_sum_transform(block, k);
    }
    let mut g = vec![T::zero(); n];
    for t in 0..blocks {
        for u in (0..blocks).filter(|&u| space.block_compatible(t, u)) {
            let src = &zeta[u * width..(u + 1) * width];
            for (alpha, ga) in g[t * width..(t + 1) * width].iter_mut().enumerate() {
                *ga = *ga + src[!alpha & mask];
            }
        }
    }
    g
}

/// `F(mu) = sum_{a, b} kernel(a, b) mu(a) mu(b)`.
pub fn quadratic_functional<T: Real>(mu: &TruncatedMeasure<T>) -> T {
    let g = kernel_sums(mu.space(), mu.weights());
    pair_with(mu.weights(), &g)
}

pub(crate) fn pair_with<T: Real>(w: &[T], g: &[T]) -> T {
    compensated_sum(w.iter().zip(g).map(|(&a, &b)| a * b))
}

/// `KL(mu || nu)` with `0 log 0 = 0`; finite because `nu > 0`.
pub fn kl_divergence<T: Real>(mu: &TruncatedMeasure<T>) -> T {
    kl_weights(mu.weights(), mu.reference())
}

pub(crate) fn kl_weights<T: Real>(w: &[T], nu: &[T]) -> T {
    compensated_sum(w.iter().zip(nu).map(|(&a, &b)| xlogx_over(a, b)))
}

/// Relative frequencies of a batch of state indices.
pub fn empirical_measure<T: Real>(
    space: Arc<StateSpace<T>>,
    states: &[usize],
) -> Result<TruncatedMeasure<T>> {
    if states.is_empty() {
        return Err(Error::domain("empirical measure of an empty batch"));
    }
    let mut counts = vec![0u64; space.len()];
    for &s in states {
        *counts
            .get_mut(s)
            .ok_or_else(|| Error::domain(format!("state {s} outside a space of {}", space.len())))? += 1;
    }
    let total = T::of_u64(states.len() as u64);
    let weights = counts.into_iter().map(|c| T::of_u64(c) / total).collect();
    Ok(TruncatedMeasure { space, weights })
}

/// Empirical measure of binary digit patterns.
pub fn empirical_measure_binary<T: Real>(
    space: Arc<StateSpace<T>>,
    patterns: &[crate::sampler::DigitPattern],
) -> Result<TruncatedMeasure<T>> {
    let k = space.tail_len();
    if space.blocks() != 1 {
        return Err(Error::domain("binary patterns need a binary state space"));
    }
    let states = patterns
        .iter()
        .map(|p| {
            if p.len() == k {
                Ok(p.bits() as usize)
            } else {
                Err(Error::domain(format!("pattern of length {} in a k = {k} space", p.len())))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    empirical_measure(space, &states)
}
