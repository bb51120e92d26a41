//! Prime-digit state spaces and compatibility kernels.
//!
//! A binary state of length `k` records, for each of the first `k` primes,
//! whether it divides an integer. For a target gcd `ell = q_1^b_1 ... q_m^b_m`
//! a mixed state prepends one ternary digit per `q_i`:
//!
//! * `0`: `q_i^b_i` does not divide,
//! * `1`: `q_i^b_i` divides exactly,
//! * `2`: `q_i^(b_i + 1)` divides,
//!
//! followed by binary digits for the smallest `k` primes other than the `q_i`.
//! State index = `ternary_index * 2^k + binary_bits`, with the first ternary
//! digit least significant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::PrimeTable;
use crate::sampler::DigitPattern;
use crate::scalar::Real;

/// `f(a, b) = 1` iff the two patterns share no common 1.
pub fn kernel_f(a: DigitPattern, b: DigitPattern) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "digit patterns of different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bits() & b.bits() == 0)
}

/// Reading of the ternary-block compatibility rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedKernel {
    /// gcd exponent exactly `b_i`: both digits nonzero and not both 2.
    #[default]
    Divisibility,
    /// Literal phrase "no common 1 or 2": both digits nonzero and different.
    StrictPhrase,
}

impl MixedKernel {
    #[inline]
    pub fn ternary_compatible(self, g: u8, h: u8) -> bool {
        if g == 0 || h == 0 {
            return false;
        }
        match self {
            MixedKernel::Divisibility => !(g == 2 && h == 2),
            MixedKernel::StrictPhrase => g != h,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MixedKernel::Divisibility => "f_ell(divisibility)",
            MixedKernel::StrictPhrase => "f_ell(strict-phrase)",
        }
    }
}

/// A mixed ternary/binary digit state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedState {
    pub ternary: Vec<u8>,
    pub tail: DigitPattern,
}

impl MixedState {
    pub fn new(ternary: Vec<u8>, tail: DigitPattern) -> Result<Self> {
        if let Some(&g) = ternary.iter().find(|&&g| g > 2) {
            return Err(Error::domain(format!("ternary digit must be 0, 1 or 2, got {g}")));
        }
        Ok(Self { ternary, tail })
    }
}

/// `f_ell`: compatible ternary block and binary tails with no common 1.
pub fn kernel_f_ell(a: &MixedState, b: &MixedState, kernel: MixedKernel) -> Result<bool> {
    if a.ternary.len() != b.ternary.len() || a.tail.len() != b.tail.len() {
        return Err(Error::domain("mixed states of different shapes"));
    }
    let block = a
        .ternary
        .iter()
        .zip(&b.ternary)
        .all(|(&g, &h)| kernel.ternary_compatible(g, h));
    Ok(block && a.tail.bits() & b.tail.bits() == 0)
}

/// Shape of a truncated state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Mode {
    Binary {
        k: usize,
    },
    Mixed {
        /// `(q_i, b_i)` with `ell = prod q_i^b_i`.
        factors: Vec<(u32, u32)>,
        k: usize,
        kernel: MixedKernel,
    },
}

impl Mode {
    pub fn ternary_len(&self) -> usize {
        match self {
            Mode::Binary { .. } => 0,
            Mode::Mixed { factors, .. } => factors.len(),
        }
    }

    pub fn binary_len(&self) -> usize {
        match self {
            Mode::Binary { k } | Mode::Mixed { k, .. } => *k,
        }
    }

    pub fn kernel_label(&self) -> &'static str {
        match self {
            Mode::Binary { .. } => "f",
            Mode::Mixed { kernel, .. } => kernel.label(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Mode::Binary { k } => format!("binary(k={k})"),
            Mode::Mixed { factors, k, .. } => {
                let ell: Vec<String> = factors.iter().map(|(q, b)| format!("{q}^{b}")).collect();
                format!("mixed(ell={}, m={}, k={k})", ell.join("*"), factors.len())
            }
        }
    }
}

/// Default capacity for binary state spaces.
pub const MAX_BINARY_STATES: usize = 1 << 24;
/// Default capacity for mixed state spaces.
pub const MAX_MIXED_STATES: usize = 1 << 20;
/// Mixed spaces below this size use the direct double sum.
pub const DIRECT_KERNEL_STATES: usize = 1 << 10;

/// A finite state space with its reference measure `nu_k` and kernel tables.
#[derive(Debug, Clone)]
pub struct StateSpace<T> {
    mode: Mode,
    /// Primes attached to the binary digits.
    tail_primes: Vec<u32>,
    reference: Vec<T>,
    /// Row-major `3^m x 3^m` ternary compatibility, `[true]` in binary mode.
    block_compat: Vec<bool>,
    blocks: usize,
}

impl<T: Real> StateSpace<T> {
    /// Binary digits for the first `k` primes.
    pub fn binary(k: usize, table: &PrimeTable) -> Result<Self> {
        Self::binary_with_capacity(k, table, MAX_BINARY_STATES)
    }

    pub fn binary_with_capacity(k: usize, table: &PrimeTable, max_states: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("truncation level k must be >= 1"));
        }
        if k >= usize::BITS as usize - 1 || (1usize << k) > max_states {
            return Err(Error::Capacity(format!(
                "2^{k} states exceed the configured limit of {max_states}"
            )));
        }
        let tail_primes = table.first_primes(k)?.to_vec();
        let reference = binary_reference(&tail_primes);
        Ok(Self {
            mode: Mode::Binary { k },
            tail_primes,
            reference,
            block_compat: vec![true],
            blocks: 1,
        })
    }

    /// State space for target gcd `ell`: binary when `ell = 1`, mixed otherwise.
    pub fn for_gcd(ell: u64, k: usize, kernel: MixedKernel, table: &PrimeTable) -> Result<Self> {
        if ell == 0 {
            return Err(Error::domain("target gcd ell must be >= 1"));
        }
        if ell == 1 {
            return Self::binary(k, table);
        }
        if ell as usize > table.limit() {
            return Err(Error::domain(format!("ell = {ell} exceeds sieve limit")));
        }
        let mut factors = Vec::new();
        let mut rest = ell as usize;
        while rest > 1 {
            let q = table.spf(rest);
            let mut b = 0;
            while rest % q as usize == 0 {
                rest /= q as usize;
                b += 1;
            }
            factors.push((q, b));
        }
        Self::mixed(factors, k, kernel, table, MAX_MIXED_STATES)
    }

    pub fn mixed(
        factors: Vec<(u32, u32)>,
        k: usize,
        kernel: MixedKernel,
        table: &PrimeTable,
        max_states: usize,
    ) -> Result<Self> {
        let m = factors.len();
        if m == 0 {
            return Err(Error::domain("mixed mode needs at least one prime factor of ell"));
        }
        let blocks = 3usize
            .checked_pow(m as u32)
            .filter(|&b| k < 40 && b.checked_mul(1 << k).is_some_and(|s| s <= max_states))
            .ok_or_else(|| {
                Error::Capacity(format!("3^{m} * 2^{k} states exceed the limit of {max_states}"))
            })?;
        let tail_primes: Vec<u32> = table
            .primes()
            .iter()
            .copied()
            .filter(|p| !factors.iter().any(|&(q, _)| q == *p))
            .take(k)
            .collect();
        if tail_primes.len() < k {
            return Err(Error::domain("sieve holds too few primes for the binary tail"));
        }
        let digits_of = |t: usize| -> Vec<u8> {
            let mut t = t;
            (0..m)
                .map(|_| {
                    let g = (t % 3) as u8;
                    t /= 3;
                    g
                })
                .collect()
        };
        let mut block_weight = Vec::with_capacity(blocks);
        for t in 0..blocks {
            let w = digits_of(t)
                .iter()
                .zip(&factors)
                .map(|(&g, &(q, b))| ternary_weight::<T>(q, b, g))
                .fold(T::one(), |a, w| a * w);
            block_weight.push(w);
        }
        let tail = binary_reference::<T>(&tail_primes);
        let mut reference = Vec::with_capacity(blocks << k);
        for &bw in &block_weight {
            reference.extend(tail.iter().map(|&w| bw * w));
        }
        let mut block_compat = vec![false; blocks * blocks];
        for t in 0..blocks {
            let gt = digits_of(t);
            for u in 0..blocks {
                let gu = digits_of(u);
                block_compat[t * blocks + u] =
                    gt.iter().zip(&gu).all(|(&g, &h)| kernel.ternary_compatible(g, h));
            }
        }
        Ok(Self {
            mode: Mode::Mixed { factors, k, kernel },
            tail_primes,
            reference,
            block_compat,
            blocks,
        })
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn reference(&self) -> &[T] {
        &self.reference
    }

    pub fn tail_primes(&self) -> &[u32] {
        &self.tail_primes
    }

    pub fn tail_len(&self) -> usize {
        self.mode.binary_len()
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    #[inline]
    pub fn block_compatible(&self, t: usize, u: usize) -> bool {
        self.block_compat[t * self.blocks + u]
    }

    /// Kernel value between two state indices.
    #[inline]
    pub fn kernel(&self, a: usize, b: usize) -> bool {
        let k = self.tail_len();
        let mask = (1usize << k) - 1;
        self.block_compatible(a >> k, b >> k) && (a & b & mask) == 0
    }

    /// Attainable range of the quadratic functional.
    ///
    /// The minimum is 0 (a point mass on any self-incompatible state). The
    /// maximum is 1 whenever some state is self-compatible; under the strict
    /// reading no state is, the largest clique has two states and the maximum
    /// of the quadratic form over the simplex is `1 - 1/2`.
    pub fn attainable_range(&self) -> (T, T) {
        match self.unique_top_state() {
            Some(_) => (T::zero(), T::one()),
            None => (T::zero(), T::lit(0.5)),
        }
    }

    /// The only state compatible with itself, when there is exactly one: the
    /// point mass on it is then the unique measure with functional value 1.
    pub fn unique_top_state(&self) -> Option<usize> {
        match &self.mode {
            Mode::Binary { .. } => Some(0),
            Mode::Mixed { kernel, .. } => match kernel {
                // all ternary digits 1 (index sum_i 3^i), empty tail
                MixedKernel::Divisibility => {
                    let m = self.mode.ternary_len();
                    let t: usize = (0..m).map(|i| 3usize.pow(i as u32)).sum();
                    Some(t << self.tail_len())
                }
                MixedKernel::StrictPhrase => None,
            },
        }
    }

    /// Map a positive integer to its state: ternary valuations of the `q_i`
    /// against `b_i` followed by divisibility by the tail primes.
    pub fn state_of(&self, x: u64) -> Result<usize> {
        if x == 0 {
            return Err(Error::domain("state map is defined on positive integers"));
        }
        let k = self.tail_len();
        let tail = crate::sampler::divisibility_pattern(x, &self.tail_primes) as usize;
        let mut t = 0usize;
        if let Mode::Mixed { factors, .. } = &self.mode {
            for (i, &(q, b)) in factors.iter().enumerate() {
                let mut v = 0u32;
                let mut r = x;
                while r % q as u64 == 0 && v <= b {
                    r /= q as u64;
                    v += 1;
                }
                let g = if v < b {
                    0
                } else if v == b {
                    1
                } else {
                    2
                };
                t += g * 3usize.pow(i as u32);
            }
        }
        Ok(t << k | tail)
    }

    /// Decode a state index of a mixed space.
    pub fn mixed_state(&self, idx: usize) -> Result<MixedState> {
        let k = self.tail_len();
        let mut t = idx >> k;
        let ternary = (0..self.mode.ternary_len())
            .map(|_| {
                let g = (t % 3) as u8;
                t /= 3;
                g
            })
            .collect();
        MixedState::new(ternary, DigitPattern::new((idx & ((1 << k) - 1)) as u64, k)?)
    }
}

fn binary_reference<T: Real>(primes: &[u32]) -> Vec<T> {
    let k = primes.len();
    let mut w = vec![T::one(); 1 << k];
    for (i, &p) in primes.iter().enumerate() {
        let s = T::one() / T::of_u64(p as u64);
        for (a, wa) in w.iter_mut().enumerate() {
            *wa = *wa * if a >> i & 1 == 1 { s } else { T::one() - s };
        }
    }
    w
}

/// Limiting probability of ternary digit `g` for prime power `q^b`.
fn ternary_weight<T: Real>(q: u32, b: u32, g: u8) -> T {
    let q = T::of_u64(q as u64);
    let qb = q.powi(b as i32);
    match g {
        0 => T::one() - T::one() / qb,
        1 => T::one() / qb - T::one() / (qb * q),
        _ => T::one() / (qb * q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute::gcd;

    fn pat(d: &[u8]) -> DigitPattern {
        DigitPattern::from_digits(d).unwrap()
    }

    #[test]
    fn binary_kernel_examples() {
        assert!(kernel_f(pat(&[0, 0, 0]), pat(&[1, 1, 1])).unwrap());
        assert!(!kernel_f(pat(&[1, 0, 0]), pat(&[1, 0, 0])).unwrap());
        assert!(kernel_f(pat(&[0, 1]), pat(&[1, 0])).unwrap());
        assert!(kernel_f(pat(&[0, 1]), pat(&[1, 0, 0])).is_err());
    }

    #[test]
    fn mixed_kernel_examples() {
        let z = pat(&[0, 0]);
        let s = |g: u8, tail: DigitPattern| MixedState::new(vec![g], tail).unwrap();
        let div = MixedKernel::Divisibility;
        assert!(kernel_f_ell(&s(1, z), &s(1, z), div).unwrap());
        assert!(!kernel_f_ell(&s(2, z), &s(2, z), div).unwrap());
        assert!(kernel_f_ell(&s(1, z), &s(2, z), div).unwrap());
        for g in 0..3 {
            assert!(!kernel_f_ell(&s(0, z), &s(g, z), div).unwrap());
        }
        assert!(!kernel_f_ell(&s(1, pat(&[1, 0])), &s(1, pat(&[1, 1])), div).unwrap());
        let strict = MixedKernel::StrictPhrase;
        assert!(!kernel_f_ell(&s(1, z), &s(1, z), strict).unwrap());
        assert!(kernel_f_ell(&s(1, z), &s(2, z), strict).unwrap());
        assert!(MixedState::new(vec![3], z).is_err());
        let other = MixedState::new(vec![1, 1], z).unwrap();
        assert!(kernel_f_ell(&s(1, z), &other, div).is_err());
    }

    #[test]
    fn kernels_symmetric_exhaustive() {
        let t = PrimeTable::new(100).unwrap();
        for k in 1..=6 {
            let sp = StateSpace::<f64>::binary(k, &t).unwrap();
            for a in 0..sp.len() {
                for b in 0..sp.len() {
                    assert_eq!(sp.kernel(a, b), sp.kernel(b, a));
                }
            }
        }
        for kernel in [MixedKernel::Divisibility, MixedKernel::StrictPhrase] {
            for (ell, k) in [(2u64, 4usize), (6, 3), (12, 2), (30, 1)] {
                let sp = StateSpace::<f64>::for_gcd(ell, k, kernel, &t).unwrap();
                for a in 0..sp.len() {
                    for b in 0..sp.len() {
                        assert_eq!(sp.kernel(a, b), sp.kernel(b, a));
                        let (sa, sb) = (sp.mixed_state(a).unwrap(), sp.mixed_state(b).unwrap());
                        assert_eq!(sp.kernel(a, b), kernel_f_ell(&sa, &sb, kernel).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn references_are_probabilities() {
        let t = PrimeTable::new(100).unwrap();
        let sp = StateSpace::<f64>::binary(5, &t).unwrap();
        assert!((sp.reference().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(sp.reference().iter().all(|&w| w > 0.0));
        let sp = StateSpace::<f64>::for_gcd(12, 3, MixedKernel::Divisibility, &t).unwrap();
        assert_eq!(sp.len(), 9 * 8);
        assert_eq!(sp.tail_primes(), &[5, 7, 11]);
        assert!((sp.reference().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(sp.reference().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn state_map_recovers_gcd_indicator() {
        let t = PrimeTable::new(100).unwrap();
        // Tail primes reach past 50, so no prime <= 50 is truncated away.
        let sp = StateSpace::<f64>::binary(15, &t).unwrap();
        for x in 1..=50u64 {
            for y in 1..=50u64 {
                let (a, b) = (sp.state_of(x).unwrap(), sp.state_of(y).unwrap());
                assert_eq!(sp.kernel(a, b), gcd(x, y) == 1, "x={x} y={y}");
            }
        }
        for ell in [2u64, 4, 6, 9] {
            let sp = StateSpace::<f64>::for_gcd(ell, 14, MixedKernel::Divisibility, &t).unwrap();
            for x in 1..=50u64 {
                for y in 1..=50u64 {
                    let (a, b) = (sp.state_of(x).unwrap(), sp.state_of(y).unwrap());
                    assert_eq!(sp.kernel(a, b), gcd(x, y) == ell, "ell={ell} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn capacity_and_shape_errors() {
        let t = PrimeTable::new(1000).unwrap();
        assert!(matches!(StateSpace::<f64>::binary(0, &t), Err(Error::Domain(_))));
        assert!(matches!(
            StateSpace::<f64>::binary_with_capacity(11, &t, 1 << 10),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            StateSpace::<f64>::for_gcd(30, 18, MixedKernel::Divisibility, &t),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn top_states() {
        let t = PrimeTable::new(100).unwrap();
        let sp = StateSpace::<f64>::for_gcd(6, 2, MixedKernel::Divisibility, &t).unwrap();
        let top = sp.unique_top_state().unwrap();
        assert_eq!(sp.mixed_state(top).unwrap().ternary, vec![1, 1]);
        assert!(sp.kernel(top, top));
        let self_compatible = (0..sp.len()).filter(|&a| sp.kernel(a, a)).count();
        assert_eq!(self_compatible, 1);
        let sp = StateSpace::<f64>::for_gcd(6, 2, MixedKernel::StrictPhrase, &t).unwrap();
        assert!((0..sp.len()).all(|a| !sp.kernel(a, a)));
        assert_eq!(sp.attainable_range(), (0.0, 0.5));
    }
}
