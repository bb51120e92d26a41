//! Rate functions with explicit formulas.

use crate::error::{Error, Result};
use crate::primes::PrimeTable;
use crate::scalar::{six_over_pi_sq, xlogx_over, Real};

/// Relative entropy of Bernoulli(`x`) with respect to Bernoulli(`c`).
pub fn bernoulli_kl<T: Real>(x: T, c: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!("level {x} outside [0, 1]")));
    }
    if !(c > T::zero() && c < T::one()) {
        return Err(Error::domain(format!("reference {c} outside (0, 1)")));
    }
    Ok(xlogx_over(x, c) + xlogx_over(T::one() - x, T::one() - c))
}

/// Rate of the square-free density: `x log(x/c) + (1-x) log((1-x)/(1-c))`
/// with `c = 6/pi^2`, endpoints taken as limits.
pub fn squarefree_rate<T: Real>(x: T) -> Result<T> {
    bernoulli_kl(x, six_over_pi_sq())
}

/// One-digit rate with `nu = Bernoulli(1/2)`: with `t = sqrt(1 - x)` the
/// only feasible measure has `mu(1) = t`, giving `t log 2t + (1-t) log 2(1-t)`.
pub fn k1_rate<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!("level {x} outside [0, 1]")));
    }
    let t = (T::one() - x).sqrt();
    bernoulli_kl(t, T::lit(0.5))
}

/// Rate at level 1: the point mass on the all-zero state is the only
/// feasible measure, so the rate is `sum_{i <= k} log(p_i / (p_i - 1))`.
pub fn rate_at_one<T: Real>(k: usize, table: &PrimeTable) -> Result<T> {
    Ok(table
        .first_primes(k)?
        .iter()
        .map(|&p| {
            let p = T::of_u64(p as u64);
            (p / (p - T::one())).ln()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squarefree_examples() {
        let c: f64 = six_over_pi_sq();
        assert_eq!(squarefree_rate(c).unwrap(), 0.0);
        assert!((squarefree_rate(1.0).unwrap() + c.ln()).abs() < 1e-15);
        assert!((squarefree_rate(0.0).unwrap() + (1.0 - c).ln()).abs() < 1e-15);
        assert!(squarefree_rate(1.1f64).is_err());
    }

    #[test]
    fn k1_matches_grid_search() {
        // Dense search over the single free parameter mu(1) = t.
        for x in [0.5f64, 0.75, 0.9] {
            let mut best = f64::INFINITY;
            let mut target = 0.0;
            for i in 0..=200_000 {
                let t = i as f64 / 200_000.0;
                let level = 1.0 - t * t;
                if (level - x).abs() < (target - x).abs() || i == 0 {
                    target = level;
                    best = xlogx_over(t, 0.5) + xlogx_over(1.0 - t, 0.5);
                }
            }
            assert!((k1_rate(x).unwrap() - best).abs() < 1e-4);
        }
    }

    #[test]
    fn rate_at_one_small_k() {
        let t = PrimeTable::new(100).unwrap();
        let r: f64 = rate_at_one(2, &t).unwrap();
        assert!((r - (2.0f64.ln() + 1.5f64.ln())).abs() < 1e-15);
    }
}
