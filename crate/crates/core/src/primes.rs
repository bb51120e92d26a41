//! Linear sieve, Möbius function, Euler products and prime reciprocal sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};

/// Primes, Möbius values and smallest prime factors for every integer up to `limit`.
///
/// Built once by a linear sieve: each composite is struck exactly once by its
/// smallest prime factor, which yields `spf` and `mobius` in the same pass.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: usize,
    primes: Vec<u32>,
    mobius: Vec<i8>,
    spf: Vec<u32>,
}

impl PrimeTable {
    pub fn new(limit: usize) -> Result<Self> {
        if limit < 2 {
            return Err(Error::domain(format!("sieve limit must be >= 2, got {limit}")));
        }
        if limit > u32::MAX as usize {
            return Err(Error::Capacity(format!("sieve limit {limit} exceeds u32 range")));
        }
        let mut spf = vec![0u32; limit + 1];
        let mut mobius = vec![0i8; limit + 1];
        let mut primes = Vec::with_capacity(approx_prime_count(limit));
        mobius[1] = 1;
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                mobius[i] = -1;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let j = i * p as usize;
                if p > si || j > limit {
                    break;
                }
                spf[j] = p;
                mobius[j] = if p == si { 0 } else { -mobius[i] };
            }
        }
        Ok(Self {
            limit,
            primes,
            mobius,
            spf,
        })
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// All primes `<= limit`, increasing.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Möbius function; `d` must lie in `1..=limit`.
    #[inline]
    pub fn mobius(&self, d: usize) -> i8 {
        debug_assert!(d >= 1 && d <= self.limit);
        self.mobius[d]
    }

    /// Smallest prime factor of `d >= 2`.
    #[inline]
    pub fn spf(&self, d: usize) -> u32 {
        debug_assert!(d >= 2 && d <= self.limit);
        self.spf[d]
    }

    pub fn is_prime(&self, x: usize) -> bool {
        x >= 2 && x <= self.limit && self.spf[x] as usize == x
    }

    /// The first `k` primes, or an error when the sieve holds fewer.
    pub fn first_primes(&self, k: usize) -> Result<&[u32]> {
        self.primes.get(..k).ok_or_else(|| {
            Error::domain(format!(
                "need {k} primes but the sieve up to {} holds {}",
                self.limit,
                self.primes.len()
            ))
        })
    }

    /// Primes `p <= bound`.
    pub fn primes_up_to(&self, bound: u64) -> &[u32] {
        let end = self.primes.partition_point(|&p| (p as u64) <= bound);
        &self.primes[..end]
    }

    /// Primes in the window `S(lo, hi) = { p : lo < p <= hi }`.
    pub fn primes_in(&self, window: PrimeWindow) -> Result<&[u32]> {
        if window.hi as usize > self.limit {
            return Err(Error::domain(format!(
                "window upper end {} exceeds sieve limit {}",
                window.hi, self.limit
            )));
        }
        let start = self.primes.partition_point(|&p| (p as u64) <= window.lo);
        let end = self.primes.partition_point(|&p| (p as u64) <= window.hi);
        Ok(&self.primes[start..end])
    }

    /// Distinct prime factors of `x` in increasing order.
    pub fn distinct_prime_factors(&self, mut x: usize) -> DistinctPrimes<'_> {
        debug_assert!(x <= self.limit);
        if x == 0 {
            x = 1;
        }
        DistinctPrimes { table: self, rest: x }
    }
}

/// Iterator over the distinct primes dividing a sieved integer.
pub struct DistinctPrimes<'a> {
    table: &'a PrimeTable,
    rest: usize,
}

impl Iterator for DistinctPrimes<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.rest < 2 {
            return None;
        }
        let p = self.table.spf[self.rest];
        while self.rest % p as usize == 0 {
            self.rest /= p as usize;
        }
        Some(p)
    }
}

fn approx_prime_count(limit: usize) -> usize {
    let x = limit as f64;
    (1.3 * x / x.ln().max(1.0)) as usize + 16
}

/// The prime window `S(lo, hi) = { p prime : lo < p <= hi }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PrimeWindow {
    pub lo: u64,
    pub hi: u64,
}

impl PrimeWindow {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::domain(format!("empty prime window S({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    /// `S(1, k)`: every prime up to `k`.
    pub fn up_to(k: u64) -> Result<Self> {
        Self::new(1, k)
    }
}

impl std::fmt::Display for PrimeWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "S({},{})", self.lo, self.hi)
    }
}

/// Euler product families over primes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "family", content = "d", rename_all = "kebab-case")]
pub enum EulerFamily {
    /// `prod (1 - p^-d) = 1/zeta(d)`.
    CoprimePair(u32),
    /// `prod (1 - 2 p^-d + p^-(2d-1))`, the probability that one draw is coprime
    /// to two independent others (d = 2) or the d-tuple analogue.
    Triple(u32),
}

impl EulerFamily {
    pub fn exponent(self) -> u32 {
        match self {
            EulerFamily::CoprimePair(d) | EulerFamily::Triple(d) => d,
        }
    }

    /// `y` such that the local factor is `1 - y`.
    fn defect<T: Real>(self, p: u32) -> T {
        let p = T::of_u64(p as u64);
        match self {
            EulerFamily::CoprimePair(d) => p.powi(-(d as i32)),
            EulerFamily::Triple(d) => {
                T::lit(2.0) * p.powi(-(d as i32)) - p.powi(-(2 * d as i32 - 1))
            }
        }
    }

    /// Constant `c` with `y <= c / p^d`.
    fn tail_constant(self) -> f64 {
        match self {
            EulerFamily::CoprimePair(_) => 1.0,
            EulerFamily::Triple(_) => 2.0,
        }
    }
}

/// A truncated Euler product together with a rigorous envelope on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerProductResult<T> {
    pub value: T,
    /// Largest prime bound included.
    pub cutoff: u64,
    /// Upper bound on `|log(full product) - log(value)|`.
    pub tail_bound: T,
}

/// Products at or below this cutoff are multiplied directly; above it they are summed in log space.
pub const LOG_SPACE_CUTOFF: u64 = 10_000;

pub fn euler_product<T: Real>(
    family: EulerFamily,
    cutoff: u64,
    table: &PrimeTable,
) -> Result<EulerProductResult<T>> {
    let d = family.exponent();
    if d < 2 {
        return Err(Error::domain(format!("Euler product exponent must be >= 2, got {d}")));
    }
    if cutoff > table.limit() as u64 {
        return Err(Error::domain(format!(
            "cutoff {cutoff} exceeds sieve limit {}",
            table.limit()
        )));
    }
    let primes = table.primes_up_to(cutoff);
    let value = if cutoff <= LOG_SPACE_CUTOFF {
        primes
            .iter()
            .fold(T::one(), |acc, &p| acc * (T::one() - family.defect::<T>(p)))
    } else {
        compensated_sum(primes.iter().map(|&p| (-family.defect::<T>(p)).ln_1p())).exp()
    };
    Ok(EulerProductResult {
        value,
        cutoff,
        tail_bound: T::lit(euler_tail_bound(family, cutoff)),
    })
}

/// `-log(1 - y) <= y / (1 - y)` with `y <= c/p^d`, summed over integers `m > N`
/// using `sum_{m>N} m^-d <= 1/((d-1)(N+1/2)^(d-1))` (midpoint rule on a convex integrand).
fn euler_tail_bound(family: EulerFamily, cutoff: u64) -> f64 {
    let d = family.exponent() as i32;
    let n = cutoff.max(1) as f64;
    let c = family.tail_constant();
    let first = c / (n + 1.0).powi(d);
    let c_eff = c / (1.0 - first);
    c_eff / ((d - 1) as f64 * (n + 0.5).powi(d - 1))
}

/// `sum_{p in S(k1, k2)} 1/p`.
pub fn mertens_sum<T: Real>(k1: u64, k2: u64, table: &PrimeTable) -> Result<T> {
    if k1 < 1 || k1 >= k2 {
        return Err(Error::domain(format!(
            "mertens window needs 1 <= k1 < k2, got ({k1}, {k2})"
        )));
    }
    let primes = table.primes_in(PrimeWindow { lo: k1, hi: k2 })?;
    Ok(compensated_sum(
        primes.iter().rev().map(|&p| T::one() / T::of_u64(p as u64)),
    ))
}

/// The Meissel–Mertens constant.
pub const MEISSEL_MERTENS: f64 = 0.261_497_212_847_642_8;
