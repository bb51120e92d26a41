//! Naive reference computations.
//!
//! Every routine here is deliberately the obvious enumeration: loops over
//! pairs, tuples, outcomes or integers with Euclid's gcd and trial division.
//! They share no code with the fast paths and back both the test suites and
//! the CLI `--check` gate.

use num_bigint::BigInt;
use num_rational::BigRational;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Ordered pairs `(i, j)`, diagonal included, with `gcd(values[i], values[j]) = ell`.
pub fn pair_count(values: &[u64], ell: u64) -> u64 {
    let mut c = 0;
    for &a in values {
        for &b in values {
            if gcd(a, b) == ell {
                c += 1;
            }
        }
    }
    c
}

/// Ordered `d`-tuples of indices whose values have gcd 1.
pub fn dtuple_coprime_count(values: &[u64], d: u32) -> u64 {
    fn rec(values: &[u64], depth: u32, g: u64) -> u64 {
        if depth == 0 {
            return u64::from(g == 1);
        }
        values.iter().map(|&v| rec(values, depth - 1, gcd(g, v))).sum()
    }
    rec(values, d, 0)
}

/// `#{(x, y) in {1..n}^2 : gcd(x, y) = ell}`.
pub fn pair_count_range(n: u64, ell: u64) -> u64 {
    let mut c = 0;
    for x in 1..=n {
        for y in 1..=n {
            if gcd(x, y) == ell {
                c += 1;
            }
        }
    }
    c
}

/// `#{(x, y, z) in {1..n}^3 : gcd(x, y) = gcd(x, z) = ell}`.
pub fn triple_count_range(n: u64, ell: u64) -> u64 {
    let mut c = 0;
    for x in 1..=n {
        let partners = (1..=n).filter(|&y| gcd(x, y) == ell).count() as u64;
        // z ranges independently of y, so enumerate the pair (y, z) explicitly.
        for _y in 0..partners {
            for z in 1..=n {
                if gcd(x, z) == ell {
                    c += 1;
                }
            }
        }
    }
    c
}

/// Exact variance of `sum_{i<j} 1{gcd(X_i, X_j) = ell}` by enumerating all `n^n` outcomes.
pub fn offdiag_variance(n: u64, ell: u64) -> BigRational {
    assert!(n <= 7, "n^n enumeration is only meant for tiny n");
    let total = n.pow(n as u32);
    let mut xs = vec![1u64; n as usize];
    let mut sum: u128 = 0;
    let mut sum_sq: u128 = 0;
    for mut code in 0..total {
        for x in xs.iter_mut() {
            *x = code % n + 1;
            code /= n;
        }
        let mut s: u128 = 0;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                if gcd(xs[i], xs[j]) == ell {
                    s += 1;
                }
            }
        }
        sum += s;
        sum_sq += s * s;
    }
    let t = BigInt::from(total);
    let num = &t * BigInt::from(sum_sq) - BigInt::from(sum) * BigInt::from(sum);
    BigRational::new(num, &t * &t)
}

pub fn is_squarefree(x: u64) -> bool {
    let mut d = 2;
    while d * d <= x {
        if x % (d * d) == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn is_prime(x: u64) -> bool {
    x >= 2 && (2..).take_while(|d| d * d <= x).all(|d| x % d != 0)
}

pub fn squarefree_count(n: u64) -> u64 {
    (1..=n).filter(|&x| is_squarefree(x)).count() as u64
}

/// Plain sieve of Eratosthenes prime count.
pub fn prime_count(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    let mut composite = vec![false; n + 1];
    let mut count = 0;
    for i in 2..=n {
        if !composite[i] {
            count += 1;
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    count
}

/// `Y_p` by scanning every value for divisibility.
pub fn divisor_counts(values: &[u64], primes: &[u32]) -> Vec<u64> {
    primes
        .iter()
        .map(|&p| values.iter().filter(|&&v| v % p as u64 == 0).count() as u64)
        .collect()
}

/// `sum_{a, b} kernel(a, b) w(a) w(b)` by direct double loop.
pub fn quadratic_form(weights: &[f64], kernel: impl Fn(usize, usize) -> bool) -> f64 {
    let mut acc = 0.0;
    for (a, &wa) in weights.iter().enumerate() {
        for (b, &wb) in weights.iter().enumerate() {
            if kernel(a, b) {
                acc += wa * wb;
            }
        }
    }
    acc
}
