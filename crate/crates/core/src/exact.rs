//! Exact finite-`n` probabilities and moments of the gcd-density statistic.
//!
//! With `X_1, X_2, X_3` i.i.d. uniform on `{1..n}` and `N = floor(n / ell)`:
//!
//! * `#{(x, y) : gcd(x, y) = ell} = sum_{m <= N} mu(m) floor(N/m)^2`
//! * `#{(x, y, z) : gcd(x, y) = gcd(x, z) = ell} = sum_{x <= N} C(x)^2`, where
//!   `C(x) = sum_{d | x} mu(d) floor(N/d)` counts `y <= N` coprime to `x`.
//!
//! Counts are carried as integers and probabilities as exact fractions.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::primes::{euler_product, EulerFamily, PrimeTable};
use crate::scalar::Real;

/// An exact probability.
pub type ExactProb = Ratio<u128>;

fn check_n(n: u64, ell: u64, table: &PrimeTable) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("sample-space size n must be >= 1"));
    }
    if ell == 0 {
        return Err(Error::domain("target gcd ell must be >= 1"));
    }
    let reduced = n / ell;
    if reduced as usize > table.limit() {
        return Err(Error::domain(format!(
            "sieve limit {} below floor(n/ell) = {reduced}",
            table.limit()
        )));
    }
    Ok(reduced)
}

/// Number of ordered pairs in `{1..n}^2` whose gcd equals `ell`.
pub fn exact_pair_count(n: u64, ell: u64, table: &PrimeTable) -> Result<u128> {
    let big_n = check_n(n, ell, table)?;
    let mut acc: i128 = 0;
    for m in 1..=big_n {
        let mu = table.mobius(m as usize);
        if mu != 0 {
            let q = (big_n / m) as i128;
            acc += mu as i128 * q * q;
        }
    }
    Ok(acc as u128)
}

/// `P(gcd(X_1, X_2) = ell)` as an exact fraction over `n^2`.
pub fn exact_pair_prob(n: u64, ell: u64, table: &PrimeTable) -> Result<ExactProb> {
    let count = exact_pair_count(n, ell, table)?;
    Ok(Ratio::new(count, (n as u128) * (n as u128)))
}

/// Coprime-partner counts `C(x)` for `x` in `0..=big_n` (index 0 unused).
fn coprime_partner_counts(big_n: u64, table: &PrimeTable) -> Vec<i64> {
    let len = big_n as usize + 1;
    let mut c = vec![0i64; len];
    for d in 1..len {
        let mu = table.mobius(d);
        if mu == 0 {
            continue;
        }
        let v = mu as i64 * (big_n as usize / d) as i64;
        let mut x = d;
        while x < len {
            c[x] += v;
            x += d;
        }
    }
    c
}

/// Number of ordered triples with `gcd(x, y) = gcd(x, z) = ell`.
pub fn exact_triple_count(n: u64, ell: u64, table: &PrimeTable) -> Result<u128> {
    let big_n = check_n(n, ell, table)?;
    if big_n == 0 {
        return Ok(0);
    }
    let c = coprime_partner_counts(big_n, table);
    Ok(c[1..].iter().map(|&v| (v as u128) * (v as u128)).sum())
}

/// `P(gcd(X_1, X_2) = gcd(X_1, X_3) = ell)` as an exact fraction over `n^3`.
pub fn exact_triple_prob(n: u64, ell: u64, table: &PrimeTable) -> Result<ExactProb> {
    let count = exact_triple_count(n, ell, table)?;
    let n = n as u128;
    Ok(Ratio::new(count, n * n * n))
}

/// Exact first and second moments of the off-diagonal statistic `W = sum_{i<j} (a_ij - alpha_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStats<T> {
    pub n: u64,
    pub ell: u64,
    /// Numerator of `alpha_n` over `n^2`.
    pub alpha_num: u128,
    /// Numerator of `beta_n` over `n^3`.
    pub beta_num: u128,
    /// `Var(W)` as an exact rational.
    pub sigma_n_sq_exact: BigRational,
    pub sigma_n_sq: T,
}

impl<T: Real> ExactStats<T> {
    pub fn alpha(&self) -> T {
        T::lit(self.alpha_num as f64) / (T::of_u64(self.n) * T::of_u64(self.n))
    }

    pub fn beta(&self) -> T {
        let n = T::of_u64(self.n);
        T::lit(self.beta_num as f64) / (n * n * n)
    }

    pub fn alpha_exact(&self) -> BigRational {
        let n = BigInt::from(self.n);
        BigRational::new(BigInt::from(self.alpha_num), &n * &n)
    }

    pub fn beta_exact(&self) -> BigRational {
        let n = BigInt::from(self.n);
        BigRational::new(BigInt::from(self.beta_num), &n * &n * &n)
    }
}

/// `sigma_n^2 = C(n,2)(alpha_n - alpha_n^2) + 6 C(n,3)(beta_n - alpha_n^2)`.
///
/// This is the variance of the sum over unordered off-diagonal pairs `i < j`; the
/// full ordered sum including `i = j` is `2 W + diagonal`.
pub fn exact_variance<T: Real>(n: u64, ell: u64, table: &PrimeTable) -> Result<ExactStats<T>> {
    if n < 3 {
        return Err(Error::domain(format!("exact variance needs n >= 3, got {n}")));
    }
    let alpha_num = exact_pair_count(n, ell, table)?;
    let beta_num = exact_triple_count(n, ell, table)?;
    let nb = BigInt::from(n);
    let alpha = BigRational::new(BigInt::from(alpha_num), &nb * &nb);
    let beta = BigRational::new(BigInt::from(beta_num), &nb * &nb * &nb);
    let alpha_sq = &alpha * &alpha;
    let pairs = BigInt::from(n) * BigInt::from(n - 1) / BigInt::from(2);
    let triples6 = BigInt::from(n) * BigInt::from(n - 1) * BigInt::from(n - 2);
    let sigma = BigRational::from_integer(pairs) * (&alpha - &alpha_sq)
        + BigRational::from_integer(triples6) * (&beta - &alpha_sq);
    let sigma_real = rational_to_real::<T>(&sigma);
    Ok(ExactStats {
        n,
        ell,
        alpha_num,
        beta_num,
        sigma_n_sq_exact: sigma,
        sigma_n_sq: sigma_real,
    })
}

pub(crate) fn rational_to_real<T: Real>(r: &BigRational) -> T {
    if r.is_zero() {
        return T::zero();
    }
    // Scale numerator so that the integer quotient keeps ~60 significant bits.
    let num = r.numer();
    let den = r.denom();
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let mant = q.to_f64().unwrap_or(f64::NAN);
    T::lit(mant * 2f64.powi(-(shift as i32)))
}

/// Limit variance of the centred count together with the truncation envelope.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LimitVariance<T> {
    pub value: T,
    /// Largest prime included in the truncated products.
    pub cutoff: u64,
    /// Upper bound on `|value - limit|` from the omitted Euler-product tails.
    pub tail_bound: T,
}

/// Limit variance `sigma^2` for gcd target `ell` and tuple size `d`.
///
/// * `d = 2`: `ell^-3 prod(1 - 2/p^2 + 1/p^3) - 36 / (ell^4 pi^4)`.
/// * `d >= 3`, `ell = 1`: `prod(1 - 2/p^d + 1/p^(2d-1)) - prod(1 - 1/p^d)^2`.
pub fn limit_variance<T: Real>(ell: u64, d: u32, table: &PrimeTable) -> Result<LimitVariance<T>> {
    if ell == 0 {
        return Err(Error::domain("target gcd ell must be >= 1"));
    }
    if d < 2 {
        return Err(Error::domain(format!("tuple size d must be >= 2, got {d}")));
    }
    if d >= 3 && ell > 1 {
        return Err(Error::Unsupported(format!(
            "no limit variance for d = {d} with ell = {ell} > 1"
        )));
    }
    let cutoff = table.limit() as u64;
    let triple = euler_product::<T>(EulerFamily::Triple(d), cutoff, table)?;
    let triple_err = triple.value * triple.tail_bound.exp_m1();
    if d == 2 {
        let l = T::of_u64(ell);
        let pi2 = T::PI() * T::PI();
        let value = triple.value / (l * l * l) - T::lit(36.0) / (l * l * l * l * pi2 * pi2);
        return Ok(LimitVariance {
            value,
            cutoff,
            tail_bound: triple_err / (l * l * l),
        });
    }
    let pair = euler_product::<T>(EulerFamily::CoprimePair(d), cutoff, table)?;
    let pair_sq = pair.value * pair.value;
    let pair_err = pair_sq * (T::lit(2.0) * pair.tail_bound).exp_m1();
    Ok(LimitVariance {
        value: triple.value - pair_sq,
        cutoff,
        tail_bound: triple_err + pair_err,
    })
}

/// Number of square-free integers in `{1..n}` via `sum_{d <= sqrt n} mu(d) floor(n / d^2)`.
///
/// Only `mu(d)` for `d <= sqrt(n)` is needed; a small local sieve is built when
/// `table` does not reach that far.
pub fn squarefree_count(n: u64, table: &PrimeTable) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("squarefree_count needs n >= 1"));
    }
    let root = n.isqrt();
    let local;
    let t = if (root as usize) <= table.limit() {
        table
    } else {
        local = PrimeTable::new(root as usize)?;
        &local
    };
    let mut acc: i64 = 0;
    for d in 1..=root {
        let mu = t.mobius(d as usize);
        if mu != 0 {
            acc += mu as i64 * (n / (d * d)) as i64;
        }
    }
    Ok(acc as u64)
}
