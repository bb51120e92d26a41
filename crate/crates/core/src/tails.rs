//! Analytic tail bounds and their desk-scale verification.
//!
//! The bounds concern `sum_{p in S(k1, k2)} Y_p^2` with `Y_p` the number of
//! draws divisible by `p`. Where an exact quantity exists (the binomial
//! moment generating function) it is computed and compared; elsewhere
//! exceedance frequencies at observable thresholds are reported with a
//! Clopper–Pearson upper confidence bound.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::primes::{PrimeTable, PrimeWindow};
use crate::sampler::{divisibility_pattern, divisor_counts, sample_tilde, sample_uniform};
use crate::scalar::{xlogx_over, Real};

/// Binary entropy `-x log x - (1-x) log(1-x)`, zero at the endpoints.
pub fn entropy_h<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!("entropy argument {x} outside [0, 1]")));
    }
    Ok(-(xlogx_over(x, T::one()) + xlogx_over(T::one() - x, T::one())))
}

/// Upper bound `4 lambda alpha^2 e^(4 lambda) + log(4(n+1)) / n` on
/// `(1/n) log E exp(lambda Y^2 / n)` for `Y ~ Binomial(n, alpha)`.
pub fn binomial_mgf_bound<T: Real>(alpha: T, lambda: T, n: u64) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("binomial size n must be >= 1"));
    }
    if !(alpha > T::zero() && alpha < T::lit(0.5)) {
        return Err(Error::Precondition(format!("alpha < 1/2 fails for alpha = {alpha}")));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::Precondition(format!("lambda >= 0 fails for lambda = {lambda}")));
    }
    let l1 = lambda.exp();
    let lhs = T::lit(2.0) * alpha * l1 * l1;
    if !(lhs < T::one()) {
        return Err(Error::Precondition(format!(
            "2 alpha e^(2 lambda) < 1 fails: {lhs} for alpha = {alpha}, lambda = {lambda}"
        )));
    }
    let nf = T::of_u64(n);
    Ok(T::lit(4.0) * lambda * alpha * alpha * l1.powi(4) + (T::lit(4.0) * (nf + T::one())).ln() / nf)
}

/// Exact `(1/n) log sum_i C(n,i) a^i (1-a)^(n-i) e^(lambda i^2 / n)` by log-sum-exp.
pub fn binomial_log_mgf_exact(alpha: f64, lambda: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 {
        return Err(Error::domain("need 0 < alpha < 1 and n >= 1"));
    }
    let nf = n as f64;
    let terms: Vec<f64> = (0..=n)
        .map(|i| {
            let i_f = i as f64;
            ln_binomial(n, i) + i_f * alpha.ln() + (nf - i_f) * (1.0 - alpha).ln() + lambda * i_f * i_f / nf
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    Ok((top + s.ln()) / nf)
}

/// `-(epsilon / 8) log k + 4`.
pub fn super_i_bound<T: Real>(k: u64, epsilon: T) -> Result<T> {
    if k < 2 {
        return Err(Error::domain(format!("prime cutoff k must be >= 2, got {k}")));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::domain("epsilon must be positive"));
    }
    Ok(-(epsilon / T::lit(8.0)) * T::of_u64(k).ln() + T::lit(4.0))
}

/// `4 log log k2 + 4 - (log k1 / 8) epsilon`.
pub fn k1k2_bound<T: Real>(k1: u64, k2: u64, epsilon: T) -> Result<T> {
    if k1 < 2 || k2 <= k1 {
        return Err(Error::domain(format!("need k2 > k1 >= 2, got k1 = {k1}, k2 = {k2}")));
    }
    if k2 < 16 {
        return Err(Error::domain(format!("k2 must be >= 16, got {k2}")));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let k2f = T::of_u64(k2);
    Ok(T::lit(4.0) * k2f.ln().ln() + T::lit(4.0) - T::of_u64(k1).ln() / T::lit(8.0) * epsilon)
}

/// `(1/n) log (2^n m^(-n epsilon / (2 k2)))`, i.e. `log 2 - epsilon log m / (2 k2)`.
pub fn coupling_bound<T: Real>(n: u64, m: u64, epsilon: T, k2: u64) -> Result<T> {
    if m == 0 {
        return Err(Error::domain("CRT multiplier m must be >= 1"));
    }
    if n == 0 || k2 == 0 {
        return Err(Error::domain("n and k2 must be >= 1"));
    }
    Ok(T::LN_2() - epsilon / T::of_u64(2 * k2) * T::of_u64(m).ln())
}

/// `n! / (sqrt(2 pi n) (n/e)^n)` with `n!` as a running product, `1 <= n <= 170`.
pub fn stirling_ratio(n: u64) -> Result<f64> {
    if !(1..=170).contains(&n) {
        return Err(Error::domain("direct factorial only for 1 <= n <= 170"));
    }
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let nf = n as f64;
    let denom = (2.0 * std::f64::consts::PI * nf).sqrt() * (nf / std::f64::consts::E).powf(nf);
    Ok(fact / denom)
}

/// Exact `C(n, i)` as a big integer.
pub fn binomial_exact(n: u64, i: u64) -> BigUint {
    if i > n {
        return BigUint::ZERO;
    }
    let i = i.min(n - i);
    let mut c = BigUint::from(1u32);
    for j in 0..i {
        c *= n - j;
        c /= j + 1;
    }
    c
}

/// Which law the draws follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMeasure {
    /// Uniform on `{1..n}`.
    Uniform,
    /// Independent divisibility by each window prime with probability `1/p`.
    Product,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailExperiment<T> {
    pub window: PrimeWindow,
    pub n: u64,
    pub epsilon: T,
    pub measure: TailMeasure,
    pub replicas: usize,
    pub exceedances: usize,
    /// `(1/n) log` of the exceedance frequency; `-inf` when none occurred.
    pub empirical_log_prob_point: T,
    /// `(1/n) log` of the 99% Clopper–Pearson upper bound.
    pub empirical_log_prob_ucb: T,
    /// Matching analytic bound, when its hypotheses hold for the window.
    pub analytic_bound: Option<T>,
    pub analytic_formula: String,
    pub max_statistic: u128,
    /// `n^2 |S(k1, k2)|`, which no replica can exceed.
    pub deterministic_max: u128,
}

/// Clopper–Pearson upper limit at confidence `level` for `x` successes in `r` trials.
pub fn clopper_pearson_upper(x: usize, r: usize, level: f64) -> Result<f64> {
    if r == 0 || x > r || !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("need 0 <= x <= r, r >= 1 and 0 < level < 1"));
    }
    if x == r {
        return Ok(1.0);
    }
    if x == 0 {
        return Ok(1.0 - (1.0 - level).powf(1.0 / r as f64));
    }
    let beta = Beta::new(x as f64 + 1.0, (r - x) as f64)
        .map_err(|e| Error::domain(format!("beta quantile: {e}")))?;
    Ok(beta.inverse_cdf(level))
}

/// Exceedances of `sum_p Y_p^2 > n^2 epsilon` over independent replicas.
pub fn mc_tail_estimate<T: Real>(
    window: PrimeWindow,
    n: u64,
    epsilon: T,
    measure: TailMeasure,
    replicas: usize,
    seed: u64,
    table: &PrimeTable,
) -> Result<TailExperiment<T>> {
    if replicas == 0 || n == 0 {
        return Err(Error::domain("need n >= 1 and at least one replica"));
    }
    let primes = table.primes_in(window)?.to_vec();
    let deterministic_max = (n as u128).pow(2) * primes.len() as u128;
    let stats = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<u128> {
            match measure {
                TailMeasure::Uniform => {
                    let batch = sample_uniform(n, n as usize, seed, r)?;
                    Ok(divisor_counts(&batch, window, table)?.sum_of_squares())
                }
                TailMeasure::Product => {
                    let batch = sample_tilde(window, n as usize, seed, r, table)?;
                    let mut counts = vec![0u128; primes.len()];
                    for p in &batch.patterns {
                        for (i, c) in counts.iter_mut().enumerate() {
                            *c += p.digit(i) as u128;
                        }
                    }
                    Ok(counts.iter().map(|c| c * c).sum())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let max_statistic = stats.iter().copied().max().unwrap_or(0);
    if max_statistic > deterministic_max {
        return Err(Error::domain("divisor-count statistic exceeded its deterministic maximum"));
    }
    let threshold = (n as f64).powi(2) * epsilon.as_f64();
    let exceedances = stats.iter().filter(|&&s| s as f64 > threshold).count();
    let nf = n as f64;
    let point = exceedances as f64 / replicas as f64;
    let ucb = clopper_pearson_upper(exceedances, replicas, 0.99)?;
    let (analytic_bound, analytic_formula) = match measure {
        TailMeasure::Product => {
            let k = window.lo.max(2);
            (Some(super_i_bound(k, epsilon)?), format!("-(eps/8) log {k} + 4"))
        }
        TailMeasure::Uniform => match k1k2_bound(window.lo, window.hi, epsilon) {
            Ok(b) => (
                Some(b),
                format!("4 log log {} + 4 - (log {} / 8) eps", window.hi, window.lo),
            ),
            Err(e) => (None, format!("not applicable: {e}")),
        },
    };
    Ok(TailExperiment {
        window,
        n,
        epsilon,
        measure,
        replicas,
        exceedances,
        empirical_log_prob_point: T::lit(point.ln() / nf),
        empirical_log_prob_ucb: T::lit(ucb.ln() / nf),
        analytic_bound,
        analytic_formula,
        max_statistic,
        deterministic_max,
    })
}

/// Largest ratio `P(E) / P~(E)` over divisibility classes `E` of the window
/// primes, with `P` uniform on `{1..n}` and `P~` the product law.
pub fn measure_change_ratio(window: PrimeWindow, n: u64, table: &PrimeTable) -> Result<f64> {
    let primes = table.primes_in(window)?.to_vec();
    if primes.len() > 20 {
        return Err(Error::Capacity("class enumeration limited to 20 window primes".into()));
    }
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    let mut counts = vec![0u64; 1 << primes.len()];
    for x in 1..=n {
        counts[divisibility_pattern(x, &primes) as usize] += 1;
    }
    let mut worst = 0.0f64;
    for (e, &c) in counts.iter().enumerate() {
        let tilde: f64 = primes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let q = 1.0 / p as f64;
                if e >> i & 1 == 1 {
                    q
                } else {
                    1.0 - q
                }
            })
            .product();
        worst = worst.max(c as f64 / n as f64 / tilde);
    }
    Ok(worst)
}
