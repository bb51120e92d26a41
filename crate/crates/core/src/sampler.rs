//! Seeded sampling under the uniform measure and the independent-divisibility
//! product measure, fast empirical gcd densities, divisor counts `Y_p`, the CRT
//! coupling and the prime-digit map.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, stream_id)`: the seed selects
//! the key and the stream id selects one of 2^64 non-overlapping streams, so
//! replicas can run on any number of threads and still reproduce bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::primes::{PrimeTable, PrimeWindow};
use crate::scalar::Real;

/// Generator for replica `stream_id` under `seed`.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Bernoulli draw with success probability exactly `1/p`.
#[inline]
fn one_in<R: Rng>(rng: &mut R, p: u32) -> bool {
    rng.random_range(0..p) == 0
}

/// I.i.d. uniform draws from `{1..n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    pub n: u64,
    pub values: Vec<u64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl SampleBatch {
    /// Wrap explicit values, e.g. from a file or a test; every value must lie in `1..=n`.
    pub fn from_values(n: u64, values: Vec<u64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v == 0 || v > n) {
            return Err(Error::domain(format!("value {bad} outside 1..={n}")));
        }
        Ok(Self {
            n,
            values,
            seed: 0,
            stream_id: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// `hist[v]` = multiplicity of value `v`.
    fn histogram(&self) -> Vec<u32> {
        let mut hist = vec![0u32; self.n as usize + 1];
        for &v in &self.values {
            hist[v as usize] += 1;
        }
        hist
    }
}

pub fn sample_uniform(n: u64, count: usize, seed: u64, stream_id: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::domain("uniform range bound n must be >= 1"));
    }
    if count == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    let mut rng = stream_rng(seed, stream_id);
    let values = (0..count).map(|_| rng.random_range(1..=n)).collect();
    Ok(SampleBatch {
        n,
        values,
        seed,
        stream_id,
    })
}

/// `#{i : d | X_i}` from a value histogram.
#[inline]
fn multiples(hist: &[u32], d: usize) -> u64 {
    hist.iter().skip(d).step_by(d).map(|&c| c as u64).sum()
}

fn require_table(table: &PrimeTable, bound: u64) -> Result<()> {
    if bound as usize > table.limit() {
        return Err(Error::domain(format!(
            "sieve limit {} below required {bound}",
            table.limit()
        )));
    }
    Ok(())
}

/// Ordered pairs `(i, j)`, diagonal included, with `gcd(X_i, X_j) = ell`.
///
/// Uses `sum_m mu(m) c_{ell m}^2` with `c_d = #{i : d | X_i}`; only squarefree
/// `m` contribute, and each `c_d` is one pass over the multiples of `d`.
pub fn gcd_pair_count(batch: &SampleBatch, ell: u64, table: &PrimeTable) -> Result<u128> {
    if ell == 0 {
        return Err(Error::domain("target gcd ell must be >= 1"));
    }
    let reduced = batch.n / ell;
    require_table(table, reduced)?;
    let hist = batch.histogram();
    let mut acc: i128 = 0;
    for m in 1..=reduced as usize {
        let mu = table.mobius(m);
        if mu != 0 {
            let c = multiples(&hist, ell as usize * m) as i128;
            acc += mu as i128 * c * c;
        }
    }
    Ok(acc as u128)
}

/// Fraction of ordered pairs (diagonal included) whose gcd is `ell`.
pub fn empirical_gcd_density<T: Real>(batch: &SampleBatch, ell: u64, table: &PrimeTable) -> Result<T> {
    let c = gcd_pair_count(batch, ell, table)?;
    let total = batch.count() as f64;
    Ok(T::lit(c as f64 / (total * total)))
}

/// Ordered `d`-tuples of indices whose values have gcd 1, or `None` if
/// `count^d` does not fit in an `i128`.
pub fn dgcd_tuple_count(batch: &SampleBatch, d: u32, table: &PrimeTable) -> Result<Option<i128>> {
    if d < 2 {
        return Err(Error::domain(format!("tuple size d must be >= 2, got {d}")));
    }
    require_table(table, batch.n)?;
    if (batch.count() as i128).checked_pow(d).is_none() {
        return Ok(None);
    }
    let hist = batch.histogram();
    let mut acc: i128 = 0;
    for m in 1..=batch.n as usize {
        let mu = table.mobius(m);
        if mu != 0 {
            let c = multiples(&hist, m) as i128;
            if c == 0 {
                continue;
            }
            acc += mu as i128 * c.pow(d);
        }
    }
    Ok(Some(acc))
}

/// Fraction of ordered `d`-tuples whose gcd is 1.
pub fn empirical_dgcd_density<T: Real>(batch: &SampleBatch, d: u32, table: &PrimeTable) -> Result<T> {
    let total = batch.count() as f64;
    if let Some(c) = dgcd_tuple_count(batch, d, table)? {
        return Ok(T::lit(c as f64 / total.powi(d as i32)));
    }
    let hist = batch.histogram();
    let mut acc = 0.0f64;
    for m in 1..=batch.n as usize {
        let mu = table.mobius(m);
        if mu != 0 {
            let c = multiples(&hist, m) as f64 / total;
            acc += mu as f64 * c.powi(d as i32);
        }
    }
    Ok(T::lit(acc))
}

/// Fraction of draws that are square-free, read off the Möbius table.
pub fn squarefree_frequency<T: Real>(batch: &SampleBatch, table: &PrimeTable) -> Result<T> {
    require_table(table, batch.n)?;
    if batch.values.is_empty() {
        return Err(Error::domain("square-free frequency of an empty batch"));
    }
    let hits = batch.values.iter().filter(|&&v| table.mobius(v as usize) != 0).count();
    Ok(T::lit(hits as f64 / batch.count() as f64))
}

/// Counts `Y_p = #{i : p | X_i}` for the primes of a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivisorCountProfile {
    pub window: PrimeWindow,
    pub primes: Vec<u32>,
    pub counts: Vec<u64>,
}

impl DivisorCountProfile {
    pub fn count(&self, p: u32) -> Option<u64> {
        self.primes.binary_search(&p).ok().map(|i| self.counts[i])
    }

    /// `sum_p Y_p^2`.
    pub fn sum_of_squares(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128 * c as u128).sum()
    }
}

pub fn divisor_counts(
    batch: &SampleBatch,
    window: PrimeWindow,
    table: &PrimeTable,
) -> Result<DivisorCountProfile> {
    require_table(table, batch.n)?;
    let primes = table.primes_in(window)?.to_vec();
    let mut counts = vec![0u64; primes.len()];
    for &v in &batch.values {
        for p in table.distinct_prime_factors(v as usize) {
            if (p as u64) <= window.lo {
                continue;
            }
            if (p as u64) > window.hi {
                break;
            }
            let idx = primes.binary_search(&p).expect("window prime");
            counts[idx] += 1;
        }
    }
    Ok(DivisorCountProfile {
        window,
        primes,
        counts,
    })
}

/// A finite prime-digit pattern: bit `i` is the digit attached to the `i`-th prime of a list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DigitPattern {
    bits: u64,
    len: u8,
}

impl DigitPattern {
    pub const MAX_LEN: usize = 64;

    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::Capacity(format!("digit patterns hold at most 64 digits, got {len}")));
        }
        if len < 64 && bits >> len != 0 {
            return Err(Error::domain(format!("bits {bits:#x} exceed length {len}")));
        }
        Ok(Self { bits, len: len as u8 })
    }

    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        let mut bits = 0u64;
        for (i, &d) in digits.iter().enumerate() {
            match d {
                0 => {}
                1 => bits |= 1 << i,
                _ => return Err(Error::domain(format!("binary digit must be 0 or 1, got {d}"))),
            }
        }
        Self::new(bits, digits.len())
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn digit(self, i: usize) -> u8 {
        ((self.bits >> i) & 1) as u8
    }

    pub fn digits(self) -> Vec<u8> {
        (0..self.len()).map(|i| self.digit(i)).collect()
    }

    /// Product of the primes whose digit is 1.
    pub fn squarefree_product(self, primes: &[u32]) -> Option<u128> {
        let mut acc: u128 = 1;
        for (i, &p) in primes.iter().enumerate().take(self.len()) {
            if self.digit(i) == 1 {
                acc = acc.checked_mul(p as u128)?;
            }
        }
        Some(acc)
    }
}

/// Divisibility pattern of `x` against `primes`.
pub fn divisibility_pattern(x: u64, primes: &[u32]) -> u64 {
    primes
        .iter()
        .enumerate()
        .filter(|&(_, &p)| x % p as u64 == 0)
        .fold(0u64, |acc, (i, _)| acc | 1 << i)
}

/// `psi`: digit `i` is 1 iff the `i`-th prime divides `x`.
pub fn psi(x: u64, k: usize, table: &PrimeTable) -> Result<DigitPattern> {
    if x == 0 {
        return Err(Error::domain("psi is defined on positive integers"));
    }
    let primes = table.first_primes(k)?;
    DigitPattern::new(divisibility_pattern(x, primes), k)
}

fn product_law_draw<R: Rng>(rng: &mut R, primes: &[u32]) -> u64 {
    primes
        .iter()
        .enumerate()
        .filter(|&(_, &p)| one_in(rng, p))
        .fold(0u64, |acc, (i, _)| acc | 1 << i)
}

/// Draws of the first `k` prime digits with independent Bernoulli(1/p_i) digits.
pub fn sample_nu(
    k: usize,
    count: usize,
    seed: u64,
    stream_id: u64,
    table: &PrimeTable,
) -> Result<Vec<DigitPattern>> {
    let primes = table.first_primes(k)?;
    if k > DigitPattern::MAX_LEN {
        return Err(Error::Capacity(format!("at most 64 digits, got {k}")));
    }
    let mut rng = stream_rng(seed, stream_id);
    Ok((0..count)
        .map(|_| DigitPattern {
            bits: product_law_draw(&mut rng, primes),
            len: k as u8,
        })
        .collect())
}

/// Draws from the product measure restricted to a window: each window prime
/// divides a draw independently with probability `1/p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TildeBatch {
    pub window: PrimeWindow,
    pub primes: Vec<u32>,
    pub patterns: Vec<DigitPattern>,
    pub seed: u64,
}

impl TildeBatch {
    /// Squarefree-product encoding of draw `i`, when it fits in `u128`.
    pub fn value(&self, i: usize) -> Option<u128> {
        self.patterns[i].squarefree_product(&self.primes)
    }
}

pub fn sample_tilde(
    window: PrimeWindow,
    count: usize,
    seed: u64,
    stream_id: u64,
    table: &PrimeTable,
) -> Result<TildeBatch> {
    let primes = table.primes_in(window)?.to_vec();
    if primes.len() > DigitPattern::MAX_LEN {
        return Err(Error::Capacity(format!(
            "window {window} holds {} primes; patterns support at most 64",
            primes.len()
        )));
    }
    let mut rng = stream_rng(seed, stream_id);
    let patterns = (0..count)
        .map(|_| DigitPattern {
            bits: product_law_draw(&mut rng, &primes),
            len: primes.len() as u8,
        })
        .collect();
    Ok(TildeBatch {
        window,
        primes,
        patterns,
        seed,
    })
}

/// Coupled draws `(X_i, X~_i)` with `X` uniform on `{1..n}` and `X~` a squarefree
/// product of window primes with the product-law divisor pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoupledBatch {
    pub n: u64,
    pub window: PrimeWindow,
    pub primes: Vec<u32>,
    /// `m = floor(n / prod p)`.
    pub m: u64,
    /// `m * prod p`: at or below it the pattern of `X` is copied.
    pub threshold: u64,
    pub pairs: Vec<(u64, u64)>,
    pub mismatch: Vec<bool>,
}

impl CoupledBatch {
    pub fn mismatch_rate(&self) -> f64 {
        self.mismatch.iter().filter(|&&b| b).count() as f64 / self.pairs.len().max(1) as f64
    }

    /// Window-prime divisor patterns of the `X~` draws.
    pub fn tilde_patterns(&self) -> Vec<u64> {
        self.pairs
            .iter()
            .map(|&(_, xt)| divisibility_pattern(xt, &self.primes))
            .collect()
    }
}

pub fn crt_coupling(
    n: u64,
    window: PrimeWindow,
    count: usize,
    seed: u64,
    table: &PrimeTable,
) -> Result<CoupledBatch> {
    if n == 0 {
        return Err(Error::domain("uniform range bound n must be >= 1"));
    }
    let primes = table.primes_in(window)?.to_vec();
    if primes.len() > DigitPattern::MAX_LEN {
        return Err(Error::Capacity(format!("window {window} holds more than 64 primes")));
    }
    let product = primes
        .iter()
        .try_fold(1u128, |acc, &p| acc.checked_mul(p as u128))
        .unwrap_or(u128::MAX);
    if product > n as u128 {
        return Err(Error::InfeasibleCoupling { product, n });
    }
    let product = product as u64;
    let m = n / product;
    let threshold = m * product;
    let mut rng = stream_rng(seed, 0);
    let mut pairs = Vec::with_capacity(count);
    let mut mismatch = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.random_range(1..=n);
        let own = divisibility_pattern(x, &primes);
        let tilde = if x <= threshold {
            own
        } else {
            product_law_draw(&mut rng, &primes)
        };
        let xt = primes
            .iter()
            .enumerate()
            .filter(|&(i, _)| tilde >> i & 1 == 1)
            .map(|(_, &p)| p as u64)
            .product();
        pairs.push((x, xt));
        mismatch.push(own != tilde);
    }
    Ok(CoupledBatch {
        n,
        window,
        primes,
        m,
        threshold,
        pairs,
        mismatch,
    })
}

/// Probability of pattern `bits` under independent Bernoulli(1/p) digits.
pub fn product_law_prob(bits: u64, primes: &[u32]) -> f64 {
    primes
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = 1.0 / p as f64;
            if bits >> i & 1 == 1 {
                s
            } else {
                1.0 - s
            }
        })
        .product()
}

/// Pearson goodness-of-fit of observed patterns against the product law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn pattern_chi_square(patterns: &[u64], primes: &[u32]) -> Result<ChiSquareTest> {
    if primes.is_empty() || primes.len() > 20 {
        return Err(Error::Capacity(format!(
            "chi-square over 2^{} cells is not supported",
            primes.len()
        )));
    }
    if patterns.is_empty() {
        return Err(Error::domain("chi-square needs at least one observation"));
    }
    let cells = 1usize << primes.len();
    let mut observed = vec![0u64; cells];
    for &b in patterns {
        observed[b as usize] += 1;
    }
    let total = patterns.len() as f64;
    let statistic = observed
        .iter()
        .enumerate()
        .map(|(b, &o)| {
            let e = total * product_law_prob(b as u64, primes);
            (o as f64 - e).powi(2) / e
        })
        .sum::<f64>();
    let dof = cells - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute;

    fn table() -> PrimeTable {
        PrimeTable::new(10_000).unwrap()
    }

    #[test]
    fn uniform_basics() {
        let b = sample_uniform(1, 10, 3, 0).unwrap();
        assert!(b.values.iter().all(|&v| v == 1));
        let a = sample_uniform(1000, 500, 42, 7).unwrap();
        let c = sample_uniform(1000, 500, 42, 7).unwrap();
        assert_eq!(a, c);
        let d = sample_uniform(1000, 500, 42, 8).unwrap();
        assert_ne!(a.values, d.values);
        assert!(a.values.iter().all(|&v| (1..=1000).contains(&v)));
        assert!(sample_uniform(0, 5, 1, 0).is_err());
        assert!(sample_uniform(5, 0, 1, 0).is_err());
    }

    #[test]
    fn density_examples() {
        let t = table();
        let b = SampleBatch::from_values(3, vec![1, 2, 3]).unwrap();
        assert_eq!(gcd_pair_count(&b, 1, &t).unwrap(), 7);
        let d: f64 = empirical_gcd_density(&b, 1, &t).unwrap();
        assert!((d - 7.0 / 9.0).abs() < 1e-15);
        let b = SampleBatch::from_values(10, vec![6]).unwrap();
        assert_eq!(empirical_gcd_density::<f64>(&b, 6, &t).unwrap(), 1.0);
        let b = SampleBatch::from_values(2, vec![1, 2]).unwrap();
        assert_eq!(dgcd_tuple_count(&b, 3, &t).unwrap(), Some(7));
        let b = SampleBatch::from_values(9, vec![1; 5]).unwrap();
        assert_eq!(empirical_dgcd_density::<f64>(&b, 4, &t).unwrap(), 1.0);
    }

    #[test]
    fn densities_partition_unity() {
        let t = table();
        let b = sample_uniform(300, 120, 5, 0).unwrap();
        let total: u128 = (1..=300).map(|l| gcd_pair_count(&b, l, &t).unwrap()).sum();
        assert_eq!(total, 120 * 120);
    }

    #[test]
    fn float_fallback_agrees() {
        let t = table();
        let b = sample_uniform(50, 40, 1, 0).unwrap();
        // 40^24 overflows i128, forcing the floating path.
        assert_eq!(dgcd_tuple_count(&b, 24, &t).unwrap(), None);
        let dens: f64 = empirical_dgcd_density(&b, 24, &t).unwrap();
        assert!((0.0..=1.0).contains(&dens));
        let exact = dgcd_tuple_count(&b, 5, &t).unwrap().unwrap() as f64 / 40f64.powi(5);
        let mut acc = 0.0;
        let hist = b.histogram();
        for m in 1..=50usize {
            acc += t.mobius(m) as f64 * (multiples(&hist, m) as f64 / 40.0).powi(5);
        }
        assert!((exact - acc).abs() < 1e-12);
    }

    #[test]
    fn divisor_count_examples() {
        let t = table();
        let b = SampleBatch::from_values(9, vec![2, 4, 6, 9]).unwrap();
        let prof = divisor_counts(&b, PrimeWindow::new(1, 3).unwrap(), &t).unwrap();
        assert_eq!(prof.count(2), Some(3));
        assert_eq!(prof.count(3), Some(2));
        assert_eq!(prof.sum_of_squares(), 13);
        let prof = divisor_counts(&b, PrimeWindow::new(10, 30).unwrap(), &t).unwrap();
        assert!(prof.counts.iter().all(|&c| c == 0));
        let b = sample_uniform(5000, 800, 9, 0).unwrap();
        let w = PrimeWindow::new(2, 200).unwrap();
        let prof = divisor_counts(&b, w, &t).unwrap();
        assert_eq!(prof.counts, brute::divisor_counts(&b.values, &prof.primes));
    }

    #[test]
    fn psi_examples() {
        let t = table();
        assert_eq!(psi(12, 3, &t).unwrap().digits(), vec![1, 1, 0]);
        assert_eq!(psi(1, 5, &t).unwrap().bits(), 0);
        assert!(psi(0, 3, &t).is_err());
        let p = DigitPattern::from_digits(&[1, 0, 1]).unwrap();
        assert_eq!(p.squarefree_product(&[2, 3, 5]), Some(10));
        assert!(DigitPattern::from_digits(&[2]).is_err());
    }

    #[test]
    fn tilde_and_nu_shapes() {
        let t = table();
        let b = sample_tilde(PrimeWindow::up_to(2).unwrap(), 0, 1, 0, &t).unwrap();
        assert!(b.patterns.is_empty());
        let b = sample_tilde(PrimeWindow::up_to(7).unwrap(), 10, 1, 0, &t).unwrap();
        assert_eq!(b.primes, vec![2, 3, 5, 7]);
        for i in 0..10 {
            let v = b.value(i).unwrap() as u64;
            assert_eq!(divisibility_pattern(v, &b.primes), b.patterns[i].bits());
        }
        let nu = sample_nu(3, 50, 1, 0, &t).unwrap();
        assert!(nu.iter().all(|p| p.len() == 3 && p.bits() < 8));
    }

    #[test]
    fn coupling_exact_threshold() {
        let t = table();
        let w = PrimeWindow::up_to(5).unwrap();
        let c = crt_coupling(300, w, 5000, 3, &t).unwrap();
        assert_eq!(c.m, 10);
        assert_eq!(c.threshold, 300);
        assert_eq!(c.mismatch_rate(), 0.0);
        let err = crt_coupling(20, w, 10, 3, &t).unwrap_err();
        assert!(matches!(err, Error::InfeasibleCoupling { product: 30, n: 20 }));
    }

    #[test]
    fn coupling_mismatch_only_above_threshold() {
        let t = table();
        let c = crt_coupling(1000, PrimeWindow::up_to(7).unwrap(), 20_000, 11, &t).unwrap();
        for (&(x, _), &mm) in c.pairs.iter().zip(&c.mismatch) {
            if mm {
                assert!(x > c.threshold);
            }
        }
        let patterns = c.tilde_patterns();
        for (&(x, xt), &b) in c.pairs.iter().zip(&patterns) {
            assert_eq!(xt % 2 == 0, b & 1 == 1);
            if x <= c.threshold {
                assert_eq!(divisibility_pattern(x, &c.primes), b);
            }
        }
    }
}
