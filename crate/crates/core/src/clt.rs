//! Replica ensembles of the normalised gcd count, Kolmogorov–Smirnov
//! distance to the standard normal, and the dependency-graph bound.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::exact::{exact_pair_count, exact_variance, limit_variance};
use crate::primes::{euler_product, EulerFamily, PrimeTable};
use crate::sampler::{dgcd_tuple_count, gcd_pair_count, sample_uniform};
use crate::scalar::{six_over_pi_sq, Real};

/// How the standard deviation enters the scale `d * s * n^((2d-1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleConvention {
    /// `s = sigma`, matching the variance of the ordered sum.
    #[default]
    Sigma,
    /// `s = sigma^2`, the scale as printed in the theorem statement.
    SigmaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization<T> {
    pub center: T,
    pub scale: T,
    /// Square root of the limit variance.
    pub sigma: T,
    pub convention: ScaleConvention,
}

/// Centre `n^d P(gcd = ell)` in the limit and the scale for the ordered sum.
pub fn normalization<T: Real>(
    n: u64,
    ell: u64,
    d: u32,
    convention: ScaleConvention,
    table: &PrimeTable,
) -> Result<Normalization<T>> {
    let var = limit_variance::<T>(ell, d, table)?;
    let sigma = var.value.sqrt();
    let nf = T::of_u64(n);
    let center = if d == 2 {
        let l = T::of_u64(ell);
        nf * nf * six_over_pi_sq::<T>() / (l * l)
    } else {
        let density = euler_product::<T>(EulerFamily::CoprimePair(d), table.limit() as u64, table)?;
        nf.powi(d as i32) * density.value
    };
    let s = match convention {
        ScaleConvention::Sigma => sigma,
        ScaleConvention::SigmaSquared => var.value,
    };
    let scale = T::of_u64(d as u64) * s * nf.powf(T::of_u64(2 * d as u64 - 1) / T::lit(2.0));
    if !(scale > T::zero()) {
        return Err(Error::domain("normalisation scale is not positive"));
    }
    Ok(Normalization { center, scale, sigma, convention })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicaEnsemble<T> {
    pub n: u64,
    pub ell: u64,
    pub d: u32,
    pub replicas: usize,
    pub values: Vec<T>,
    pub normalization: Normalization<T>,
    pub seed: u64,
}

impl<T: Real> ReplicaEnsemble<T> {
    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of_u64(self.values.len() as u64)
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> T {
        let m = self.mean();
        let ss: T = self.values.iter().map(|&v| (v - m) * (v - m)).sum();
        ss / T::of_u64(self.values.len() as u64 - 1)
    }

    pub fn standard_error(&self) -> T {
        (self.variance() / T::of_u64(self.values.len() as u64)).sqrt()
    }
}

/// Ordered-tuple counts for `replicas` independent batches of `n` draws from
/// `{1..n}`, replica `r` on stream `r`, centred and scaled.
pub fn replicate_statistic<T: Real>(
    n: u64,
    ell: u64,
    d: u32,
    replicas: usize,
    seed: u64,
    convention: ScaleConvention,
    table: &PrimeTable,
) -> Result<ReplicaEnsemble<T>> {
    if n < 3 {
        return Err(Error::domain(format!("n must be >= 3, got {n}")));
    }
    if replicas < 2 {
        return Err(Error::domain(format!("need at least 2 replicas, got {replicas}")));
    }
    if d >= 3 && ell != 1 {
        return Err(Error::Unsupported(format!("d = {d} ensembles only for ell = 1")));
    }
    let norm = normalization::<T>(n, ell, d, convention, table)?;
    let raw = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let batch = sample_uniform(n, n as usize, seed, r)?;
            if d == 2 {
                Ok(gcd_pair_count(&batch, ell, table)? as f64)
            } else {
                dgcd_tuple_count(&batch, d, table)?
                    .map(|c| c as f64)
                    .ok_or_else(|| Error::Capacity(format!("n^{d} ordered tuples overflow i128")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, s) = (norm.center.as_f64(), norm.scale.as_f64());
    Ok(ReplicaEnsemble {
        n,
        ell,
        d,
        replicas,
        values: raw.into_iter().map(|v| T::lit((v - c) / s)).collect(),
        normalization: norm,
        seed,
    })
}

/// Exact expectation of the normalised ordered pair count at finite `n`:
/// `n(n-1) alpha_n` off the diagonal plus one expected diagonal hit
/// (`X_i = ell` has probability `1/n` when `ell <= n`).
pub fn exact_normalized_mean<T: Real>(
    n: u64,
    ell: u64,
    norm: &Normalization<T>,
    table: &PrimeTable,
) -> Result<T> {
    let pairs = exact_pair_count(n, ell, table)? as f64;
    let nf = n as f64;
    let alpha = pairs / (nf * nf);
    let diagonal = if ell <= n { 1.0 } else { 0.0 };
    let mean = nf * (nf - 1.0) * alpha + diagonal;
    Ok(T::lit((mean - norm.center.as_f64()) / norm.scale.as_f64()))
}

/// Standard normal CDF through `erfc`, accurate to about 1e-15.
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// One-sample KS statistic against the standard normal.
pub fn ks_distance<T: Real>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("KS distance of a sample containing NaN"));
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let r = v.len() as f64;
    let d = v.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let phi = std_normal_cdf(x);
        acc.max((i + 1) as f64 / r - phi).max(phi - i as f64 / r)
    });
    Ok(T::lit(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceFit<T> {
    pub slope: T,
    pub intercept: T,
}

/// Least-squares line through `(log n, log d_ks)`.
pub fn convergence_fit<T: Real>(points: &[(u64, T)]) -> Result<ConvergenceFit<T>> {
    if points.len() < 3 {
        return Err(Error::domain("convergence fit needs at least 3 points"));
    }
    let mut ns: Vec<u64> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() != points.len() {
        return Err(Error::domain("convergence fit needs distinct n"));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > T::zero()) || p.0 == 0) {
        return Err(Error::domain(format!("cannot take logs of point ({}, {})", p.0, p.1)));
    }
    let xs: Vec<T> = points.iter().map(|p| T::of_u64(p.0).ln()).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1.ln()).collect();
    let m = T::of_u64(points.len() as u64);
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(ConvergenceFit { slope, intercept: my - slope * mx })
}

/// Which count of dependency neighbours to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMode {
    /// `D = 2n - 5`, as stated in the proof.
    Paper,
    /// `D = 2n - 3`: pairs sharing an index with `(i, j)`, itself included.
    #[default]
    Recount,
}

impl DegreeMode {
    pub fn degree(self, n: u64) -> u64 {
        match self {
            DegreeMode::Paper => 2 * n - 5,
            DegreeMode::Recount => 2 * n - 3,
        }
    }
}

/// `D^2 N / s^3 + sqrt(2 s / pi) D^(3/2) sqrt(N) / s^2` with `N = C(n, 2)`
/// and `s = sigma_n`, using `|a~| <= 1` for the third and fourth moments.
pub fn baldi_bound<T: Real>(n: u64, sigma_n: T, mode: DegreeMode) -> Result<T> {
    if n < 3 {
        return Err(Error::domain(format!("n must be >= 3, got {n}")));
    }
    if !(sigma_n > T::zero()) {
        return Err(Error::domain("sigma_n must be positive"));
    }
    let d = T::of_u64(mode.degree(n));
    let pairs = T::of_u64(n * (n - 1) / 2);
    let s = sigma_n;
    let first = d * d * pairs / (s * s * s);
    let second = (T::lit(2.0) * s / T::PI()).sqrt() * d.powf(T::lit(1.5)) * pairs.sqrt() / (s * s);
    Ok(first + second)
}

#[derive(Debug, Clone, Serialize)]
pub struct KSReport<T> {
    pub n: u64,
    pub replicas: usize,
    pub d_ks: T,
    pub baldi_bound: T,
    pub dependency_degree: u64,
    /// The bound is at least 1, so domination holds trivially.
    pub vacuous: bool,
}

impl<T: Real> KSReport<T> {
    pub fn dominated(&self) -> bool {
        self.d_ks <= self.baldi_bound
    }
}

/// KS distance of an ensemble with the bound evaluated at the exact `sigma_n`.
pub fn ks_report<T: Real>(
    ensemble: &ReplicaEnsemble<T>,
    mode: DegreeMode,
    table: &PrimeTable,
) -> Result<KSReport<T>> {
    if ensemble.d != 2 {
        return Err(Error::Unsupported("the dependency-graph bound is stated for pairs".into()));
    }
    let stats = exact_variance::<T>(ensemble.n, ensemble.ell, table)?;
    let bound = baldi_bound(ensemble.n, stats.sigma_n_sq.sqrt(), mode)?;
    Ok(KSReport {
        n: ensemble.n,
        replicas: ensemble.replicas,
        d_ks: ks_distance(&ensemble.values)?,
        baldi_bound: bound,
        dependency_degree: mode.degree(ensemble.n),
        vacuous: bound >= T::one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[0.0f64]).unwrap(), 0.5);
        assert!(ks_distance::<f64>(&[]).is_err());
        let r = 1000;
        let z = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = (1..=r).map(|i| z.inverse_cdf((i as f64 - 0.5) / r as f64)).collect();
        assert!((ks_distance(&q).unwrap() - 0.5 / r as f64).abs() < 1e-9);
        let mut rev = q.clone();
        rev.reverse();
        assert_eq!(ks_distance(&rev).unwrap(), ks_distance(&q).unwrap());
    }

    #[test]
    fn cdf_accuracy() {
        let z = Normal::new(0.0, 1.0).unwrap();
        for i in -80..=80 {
            let x = i as f64 / 10.0;
            assert!((std_normal_cdf(x) - z.cdf(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(u64, f64)> = [100u64, 400, 1600].iter().map(|&n| (n, 3.0 / (n as f64).sqrt())).collect();
        let fit = convergence_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let flat = convergence_fit(&[(10, 0.1f64), (20, 0.1), (40, 0.1)]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        assert!(convergence_fit(&[(10, 0.1f64), (20, 0.0), (40, 0.1)]).is_err());
        assert!(convergence_fit(&[(10, 0.1f64), (10, 0.2), (40, 0.1)]).is_err());
    }

    #[test]
    fn baldi_properties() {
        let p = baldi_bound(1000, 5.0f64, DegreeMode::Paper).unwrap();
        let r = baldi_bound(1000, 5.0f64, DegreeMode::Recount).unwrap();
        assert!(r >= p && p > 0.0);
        assert!(baldi_bound(1000, 1e30f64, DegreeMode::Recount).unwrap() < 1e-20);
        assert!(baldi_bound(2, 1.0f64, DegreeMode::Paper).is_err());
    }

    #[test]
    fn two_replicas_are_fine() {
        let t = PrimeTable::new(100).unwrap();
        let e = replicate_statistic::<f64>(50, 1, 2, 2, 1, ScaleConvention::Sigma, &t).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!(e.variance().is_finite());
        assert!(replicate_statistic::<f64>(50, 1, 2, 1, 1, ScaleConvention::Sigma, &t).is_err());
        assert!(replicate_statistic::<f64>(50, 2, 3, 2, 1, ScaleConvention::Sigma, &t).is_err());
    }
}
