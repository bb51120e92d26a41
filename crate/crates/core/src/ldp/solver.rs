//! Truncated rate function `I^(k)(x) = inf { KL(mu || nu) : F(mu) = x }`.
//!
//! Stationary points of the Lagrangian have the Gibbs form
//! `mu(a) ∝ nu(a) exp(2 lambda G(a))`, where `G` is the kernel sum of `mu`
//! itself. For a fixed multiplier that equation is solved by damped
//! fixed-point iteration. A sweep over `lambda` traces one curve
//! `lambda -> (F, KL)` per starting measure; the level is bracketed on those
//! curves and the multiplier bisected. The constraint set is not convex, so
//! every value returned is the KL of an explicit feasible measure, hence an
//! upper bound on the infimum.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampler::stream_rng;
use crate::scalar::Real;

use super::measure::{kernel_sums, kl_weights, pair_with, TruncatedMeasure};
use super::state::StateSpace;

/// Sweeps keep every fixed point's weights up to this many states; larger
/// spaces recompute warm starts on demand.
const CACHE_WEIGHTS_UP_TO: usize = 1 << 14;
/// Smallest positive multiplier on the sweep grid.
const LAMBDA_MIN: f64 = 0.02;
/// Ratio between consecutive sweep multipliers.
const LAMBDA_RATIO: f64 = 1.25;
/// Outward extension stops past this multiplier.
const LAMBDA_EXTEND_MAX: f64 = 1e7;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig<T> {
    /// Initial weight of the new Gibbs iterate; halved whenever the residual grows.
    pub damping: T,
    /// Stationarity and level tolerance.
    pub tol: T,
    pub max_iter: usize,
    pub lambda_window: (T, T),
    /// Extra starting measures besides `nu` itself.
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            damping: T::lit(0.5),
            tol: T::lit(1e-10),
            max_iter: 5_000,
            lambda_window: (T::lit(-50.0), T::lit(50.0)),
            restarts: 8,
            seed: 0x5eed,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lambda_window;
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::domain("damping must lie in (0, 1]"));
        }
        if !(self.tol > T::zero()) || self.max_iter == 0 {
            return Err(Error::domain("tolerance and iteration budget must be positive"));
        }
        if !(lo < T::zero() && hi > T::zero()) {
            return Err(Error::domain("lambda window must contain 0 in its interior"));
        }
        Ok(())
    }

    /// Tolerance actually enforced: never below what the scalar can resolve.
    pub fn effective_tol(&self) -> T {
        self.tol.max(T::solver_floor())
    }

    /// Fixed points are iterated two decades past the level tolerance so the
    /// level of a converged iterate is itself accurate to `tol`.
    pub fn stationarity_tol(&self) -> T {
        (self.tol * T::lit(0.01)).max(T::solver_floor())
    }
}

/// Result of the damped iteration at one multiplier.
#[derive(Debug, Clone)]
pub struct FixedPoint<T> {
    pub lambda: T,
    pub weights: Vec<T>,
    pub level: T,
    pub kl: T,
    pub iterations: usize,
    pub converged: bool,
    /// `max_a |mu(a) - nu(a) exp(2 lambda G(a)) / Z|` at the returned iterate.
    pub residual: T,
}

fn gibbs<T: Real>(log_nu: &[T], g: &[T], lambda: T, out: &mut [T]) {
    let two_lambda = lambda + lambda;
    let mut top = T::neg_infinity();
    for ((o, &l), &ga) in out.iter_mut().zip(log_nu).zip(g) {
        *o = l + two_lambda * ga;
        top = top.max(*o);
    }
    let mut z = T::zero();
    for o in out.iter_mut() {
        *o = (*o - top).exp();
        z = z + *o;
    }
    out.iter_mut().for_each(|o| *o = *o / z);
}

/// Damped iteration `mu <- (1 - d) mu + d Gibbs(mu)` at a fixed multiplier.
pub fn fixed_point<T: Real>(
    space: &StateSpace<T>,
    lambda: T,
    init: &[T],
    config: &SolverConfig<T>,
) -> FixedPoint<T> {
    let log_nu: Vec<T> = space.reference().iter().map(|w| w.ln()).collect();
    fixed_point_with(space, &log_nu, lambda, init, config)
}

fn fixed_point_with<T: Real>(
    space: &StateSpace<T>,
    log_nu: &[T],
    lambda: T,
    init: &[T],
    config: &SolverConfig<T>,
) -> FixedPoint<T> {
    let tol = config.stationarity_tol();
    let floor = T::lit(1e-4);
    let mut mu = init.to_vec();
    let mut target = vec![T::zero(); mu.len()];
    let mut damping = config.damping;
    let mut previous = T::infinity();
    let mut residual = T::infinity();
    let mut g = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        g = kernel_sums(space, &mu);
        gibbs(log_nu, &g, lambda, &mut target);
        residual = mu
            .iter()
            .zip(&target)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        if residual < tol {
            converged = true;
            break;
        }
        if residual > previous {
            damping = (damping * T::lit(0.5)).max(floor);
        }
        previous = residual;
        for (m, &t) in mu.iter_mut().zip(&target) {
            *m = *m + damping * (t - *m);
        }
    }
    if !converged {
        g = kernel_sums(space, &mu);
    }
    FixedPoint {
        lambda,
        level: pair_with(&mu, &g),
        kl: kl_weights(&mu, space.reference()),
        weights: mu,
        iterations,
        converged,
        residual,
    }
}

/// Bracketing quality and provenance of a rate value.
#[derive(Debug, Clone, Serialize)]
pub struct RateDiagnostics {
    /// `|F(mu) - x|` of the returned measure.
    pub level_residual: f64,
    /// Gibbs stationarity residual of the returned measure.
    pub stationarity_residual: f64,
    /// Multiplier interval that bracketed the level, when bisection was used.
    pub bracket: Option<(f64, f64)>,
    /// Number of brackets examined across all starting measures.
    pub brackets: usize,
    /// Starting measure (0 is `nu`) that produced the returned value.
    pub restart: usize,
    /// The level fell in a jump of the Gibbs curve; the returned measure is a
    /// mixture of the two sides, feasible but not stationary.
    pub mixture: bool,
    /// Closed-form endpoint (`x = F(nu)` or a unique feasible measure).
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct RatePoint<T> {
    pub x: T,
    pub rate: T,
    pub lambda: T,
    pub iterations: usize,
    pub converged: bool,
    pub measure: TruncatedMeasure<T>,
    pub diagnostics: RateDiagnostics,
}

#[derive(Debug, Clone)]
struct Sweep<T> {
    restart: usize,
    /// Sorted by multiplier.
    points: Vec<FixedPoint<T>>,
}

/// Solver for one state space; sweeps are shared across levels.
#[derive(Debug)]
pub struct RateSolver<T> {
    space: Arc<StateSpace<T>>,
    config: SolverConfig<T>,
    log_nu: Vec<T>,
    inits: Vec<Vec<T>>,
    sweeps: Vec<Sweep<T>>,
    reference_level: T,
}

impl<T: Real> RateSolver<T> {
    pub fn new(space: Arc<StateSpace<T>>, config: SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        let log_nu: Vec<T> = space.reference().iter().map(|w| w.ln()).collect();
        let inits: Vec<Vec<T>> = (0..=config.restarts)
            .map(|r| starting_measure(space.reference(), config.seed, r))
            .collect();
        let reference_level = {
            let g = kernel_sums(&space, space.reference());
            pair_with(space.reference(), &g)
        };
        let mut solver = Self {
            space,
            config,
            log_nu,
            inits,
            sweeps: Vec::new(),
            reference_level,
        };
        let grid = solver.lambda_grid();
        solver.sweeps = (0..solver.inits.len())
            .into_par_iter()
            .map(|r| solver.sweep(r, &grid))
            .collect();
        Ok(solver)
    }

    pub fn space(&self) -> &Arc<StateSpace<T>> {
        &self.space
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    /// `F(nu)`, where the rate vanishes.
    pub fn reference_level(&self) -> T {
        self.reference_level
    }

    fn lambda_grid(&self) -> Vec<T> {
        let (lo, hi) = self.config.lambda_window;
        let ratio = T::lit(LAMBDA_RATIO);
        let mut grid = vec![T::zero()];
        for (bound, sign) in [(hi, T::one()), (-lo, -T::one())] {
            let mut m = T::lit(LAMBDA_MIN).min(bound);
            loop {
                grid.push(sign * m);
                if m >= bound {
                    break;
                }
                m = (m * ratio).min(bound);
            }
        }
        grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        grid
    }

    /// Restart 0 follows the Gibbs branch through `nu` by continuation; other
    /// restarts solve every multiplier from their own perturbed start.
    fn sweep(&self, restart: usize, grid: &[T]) -> Sweep<T> {
        let init = &self.inits[restart];
        let mut points = Vec::with_capacity(grid.len());
        let zero = grid.iter().position(|l| *l == T::zero()).expect("grid holds 0");
        if restart == 0 {
            let centre = self.solve_at(T::zero(), init);
            let mut up = Vec::new();
            let mut warm = centre.weights.clone();
            for &l in &grid[zero + 1..] {
                let fp = self.solve_at(l, &warm);
                warm.clone_from(&fp.weights);
                up.push(fp);
            }
            let mut down = Vec::new();
            warm.clone_from(&centre.weights);
            for &l in grid[..zero].iter().rev() {
                let fp = self.solve_at(l, &warm);
                warm.clone_from(&fp.weights);
                down.push(fp);
            }
            down.reverse();
            points.extend(down);
            points.push(centre);
            points.extend(up);
        } else {
            points.extend(grid.iter().map(|&l| self.solve_at(l, init)));
        }
        if self.space.len() > CACHE_WEIGHTS_UP_TO {
            points.iter_mut().for_each(|p| p.weights = Vec::new());
        }
        Sweep { restart, points }
    }

    fn solve_at(&self, lambda: T, init: &[T]) -> FixedPoint<T> {
        fixed_point_with(&self.space, &self.log_nu, lambda, init, &self.config)
    }

    /// Weights of a sweep point, recomputed when they were not cached.
    fn weights_of(&self, sweep: &Sweep<T>, idx: usize) -> Vec<T> {
        let p = &sweep.points[idx];
        if !p.weights.is_empty() {
            return p.weights.clone();
        }
        self.solve_at(p.lambda, &self.inits[sweep.restart]).weights
    }

    fn measure(&self, weights: Vec<T>) -> Result<TruncatedMeasure<T>> {
        TruncatedMeasure::from_mass(self.space.clone(), weights)
    }

    /// Rate at a single level.
    pub fn solve(&self, x: T) -> Result<RatePoint<T>> {
        let (lo, hi) = self.space.attainable_range();
        if !(x >= lo && x <= hi) {
            return Err(Error::InfeasibleLevel {
                level: x.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        let tol = self.config.effective_tol();
        if (x - self.reference_level).abs() <= tol {
            return self.exact_point(x, T::zero(), TruncatedMeasure::reference_measure(self.space.clone()));
        }
        if x == hi {
            if let Some(top) = self.space.unique_top_state() {
                let pm = TruncatedMeasure::point_mass(self.space.clone(), top)?;
                return self.exact_point(x, T::infinity(), pm);
            }
        }
        let mut candidates = Vec::new();
        let mut brackets = 0;
        for sweep in &self.sweeps {
            let pts = &sweep.points;
            let usable: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].converged).collect();
            for w in usable.windows(2) {
                let (i, j) = (w[0], w[1]);
                let (fi, fj) = (pts[i].level - x, pts[j].level - x);
                if fi * fj <= T::zero() || fi.abs().min(fj.abs()) <= tol {
                    brackets += 1;
                    candidates.push(self.bisect(sweep, i, j, x)?);
                }
            }
        }
        if candidates.is_empty() {
            // The level lies beyond every swept value: push the multiplier outward.
            if let Some(c) = self.extend(x)? {
                brackets += 1;
                candidates.push(c);
            }
        }
        let mut best = candidates
            .into_iter()
            .filter(|c| c.diagnostics.level_residual <= tol.as_f64())
            .min_by(|a, b| a.rate.partial_cmp(&b.rate).expect("finite rates"))
            .ok_or_else(|| {
                Error::Unsupported(format!(
                    "no feasible measure found at level {x}; widen the lambda window"
                ))
            })?;
        best.diagnostics.brackets = brackets;
        Ok(best)
    }

    fn exact_point(&self, x: T, lambda: T, measure: TruncatedMeasure<T>) -> Result<RatePoint<T>> {
        let level = super::measure::quadratic_functional(&measure);
        let stationarity = if lambda.is_finite() {
            self.stationarity(measure.weights(), lambda)
        } else {
            T::zero()
        };
        Ok(RatePoint {
            x,
            rate: kl_weights(measure.weights(), self.space.reference()),
            lambda,
            iterations: 0,
            converged: true,
            diagnostics: RateDiagnostics {
                level_residual: (level - x).abs().as_f64(),
                stationarity_residual: stationarity.as_f64(),
                bracket: None,
                brackets: 0,
                restart: 0,
                mixture: false,
                exact: true,
            },
            measure,
        })
    }

    fn stationarity(&self, w: &[T], lambda: T) -> T {
        let g = kernel_sums(&self.space, w);
        let mut target = vec![T::zero(); w.len()];
        gibbs(&self.log_nu, &g, lambda, &mut target);
        w.iter().zip(&target).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Bisection on the multiplier between two sweep points whose levels
    /// straddle `x`, warm-started from the side kept at each step.
    fn bisect(&self, sweep: &Sweep<T>, i: usize, j: usize, x: T) -> Result<RatePoint<T>> {
        let tol = self.config.effective_tol();
        let pts = &sweep.points;
        let mut lo = FixedPoint { weights: self.weights_of(sweep, i), ..pts[i].clone() };
        let mut hi = FixedPoint { weights: self.weights_of(sweep, j), ..pts[j].clone() };
        let bracket = (lo.lambda.as_f64(), hi.lambda.as_f64());
        let mut iterations = lo.iterations + hi.iterations;
        for p in [&lo, &hi] {
            if (p.level - x).abs() <= tol {
                return self.finish(p.clone(), x, iterations, sweep.restart, bracket);
            }
        }
        let lo_sign = (lo.level - x).signum();
        for _ in 0..BISECTION_STEPS {
            let mid = (lo.lambda + hi.lambda) * T::lit(0.5);
            if mid <= lo.lambda || mid >= hi.lambda {
                break;
            }
            let warm = if (lo.level - x).abs() <= (hi.level - x).abs() { &lo } else { &hi };
            let fp = self.solve_at(mid, &warm.weights);
            iterations += fp.iterations;
            if (fp.level - x).abs() <= tol && fp.converged {
                return self.finish(fp, x, iterations, sweep.restart, bracket);
            }
            if (fp.level - x).signum() == lo_sign {
                lo = fp;
            } else {
                hi = fp;
            }
        }
        // The Gibbs curve jumps across x: mix the two sides to land on x.
        self.mixture(lo, hi, x, iterations, sweep.restart, bracket)
    }

    fn finish(
        &self,
        fp: FixedPoint<T>,
        x: T,
        iterations: usize,
        restart: usize,
        bracket: (f64, f64),
    ) -> Result<RatePoint<T>> {
        let measure = self.measure(fp.weights)?;
        Ok(RatePoint {
            x,
            rate: fp.kl,
            lambda: fp.lambda,
            iterations,
            converged: fp.converged,
            diagnostics: RateDiagnostics {
                level_residual: (fp.level - x).abs().as_f64(),
                stationarity_residual: fp.residual.as_f64(),
                bracket: Some(bracket),
                brackets: 0,
                restart,
                mixture: false,
                exact: false,
            },
            measure,
        })
    }

    /// `F((1 - s) a + s b)` is a quadratic in `s`; choose the root in [0, 1].
    /// KL is convex, so the mixture's rate is at most the larger endpoint KL.
    fn mixture(
        &self,
        a: FixedPoint<T>,
        b: FixedPoint<T>,
        x: T,
        iterations: usize,
        restart: usize,
        bracket: (f64, f64),
    ) -> Result<RatePoint<T>> {
        let d: Vec<T> = b.weights.iter().zip(&a.weights).map(|(&p, &q)| p - q).collect();
        let ga = kernel_sums(&self.space, &a.weights);
        let gd = kernel_sums(&self.space, &d);
        let c0 = a.level - x;
        let c1 = pair_with(&d, &ga) + pair_with(&a.weights, &gd);
        let c2 = pair_with(&d, &gd);
        let s = solve_unit_quadratic(c2, c1, c0).unwrap_or(T::lit(0.5));
        let w: Vec<T> = a.weights.iter().zip(&d).map(|(&p, &q)| (p + s * q).max(T::zero())).collect();
        let measure = self.measure(w)?;
        let level = super::measure::quadratic_functional(&measure);
        let lambda = a.lambda + s * (b.lambda - a.lambda);
        Ok(RatePoint {
            x,
            rate: kl_weights(measure.weights(), self.space.reference()),
            lambda,
            iterations,
            converged: false,
            diagnostics: RateDiagnostics {
                level_residual: (level - x).abs().as_f64(),
                stationarity_residual: self.stationarity(measure.weights(), lambda).as_f64(),
                bracket: Some(bracket),
                brackets: 0,
                restart,
                mixture: true,
                exact: false,
            },
            measure,
        })
    }

    /// Continue the restart-0 branch past the window edge, doubling the
    /// multiplier until the level is bracketed.
    fn extend(&self, x: T) -> Result<Option<RatePoint<T>>> {
        let sweep = &self.sweeps[0];
        let pts = &sweep.points;
        let (edge, sign) = if x > pts[pts.len() - 1].level {
            (pts.len() - 1, T::one())
        } else if x < pts[0].level {
            (0, -T::one())
        } else {
            return Ok(None);
        };
        let mut prev = FixedPoint { weights: self.weights_of(sweep, edge), ..pts[edge].clone() };
        let limit = T::lit(LAMBDA_EXTEND_MAX);
        while prev.lambda.abs() < limit {
            let next = self.solve_at(prev.lambda + prev.lambda, &prev.weights);
            if (next.level - x) * sign >= -self.config.effective_tol() {
                let ext = Sweep {
                    restart: 0,
                    points: if sign > T::zero() { vec![prev, next] } else { vec![next, prev] },
                };
                return self.bisect(&ext, 0, 1, x).map(Some);
            }
            prev = next;
        }
        Ok(None)
    }
}

/// Root in [0, 1] of `c2 s^2 + c1 s + c0`, when one exists.
fn solve_unit_quadratic<T: Real>(c2: T, c1: T, c0: T) -> Option<T> {
    let in_unit = |s: T| s >= T::zero() && s <= T::one();
    let eps = T::epsilon();
    if c2.abs() <= eps * (c1.abs() + c0.abs()) {
        return (c1 != T::zero()).then(|| -c0 / c1).filter(|&s| in_unit(s));
    }
    let disc = c1 * c1 - T::lit(4.0) * c2 * c0;
    if disc < T::zero() {
        return None;
    }
    // Numerically stable pair of roots.
    let q = -(c1 + c1.signum() * disc.sqrt()) * T::lit(0.5);
    let mut roots = vec![q / c2];
    if q != T::zero() {
        roots.push(c0 / q);
    }
    roots.into_iter().filter(|&s| in_unit(s)).reduce(T::min)
}

/// `nu` for restart 0, otherwise `nu` reweighted by `exp(u)`, `u ~ U(-2, 2)`.
fn starting_measure<T: Real>(nu: &[T], seed: u64, restart: usize) -> Vec<T> {
    if restart == 0 {
        return nu.to_vec();
    }
    let mut rng = stream_rng(seed, restart as u64);
    let mut w: Vec<T> = nu
        .iter()
        .map(|&v| v * T::lit(rng.random_range(-2.0..2.0f64)).exp())
        .collect();
    let z: T = w.iter().copied().sum();
    w.iter_mut().for_each(|v| *v = *v / z);
    w
}

pub fn rate_function_point<T: Real>(
    x: T,
    space: Arc<StateSpace<T>>,
    config: SolverConfig<T>,
) -> Result<RatePoint<T>> {
    RateSolver::new(space, config)?.solve(x)
}

/// One row of a [`RateCurve`].
#[derive(Debug, Clone, Serialize)]
pub struct RateRecord<T> {
    pub x: T,
    pub rate: T,
    pub lambda: T,
    pub iterations: usize,
    pub converged: bool,
    pub measure_checksum: String,
    pub diagnostics: RateDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCurve<T> {
    pub mode: super::state::Mode,
    pub mode_label: String,
    pub kernel: String,
    pub reference_level: T,
    pub solver: SolverConfig<T>,
    pub records: Vec<RateRecord<T>>,
}

impl<T: Real> RateCurve<T> {
    /// Rates never decrease moving away from `F(nu)` in either direction,
    /// up to `slack`.
    pub fn is_monotone_away_from_reference(&self, slack: T) -> bool {
        let c = self.reference_level;
        self.records.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            if b.x <= c {
                a.rate + slack >= b.rate
            } else if a.x >= c {
                b.rate + slack >= a.rate
            } else {
                true
            }
        })
    }
}

/// SHA-256 of the little-endian `f64` encoding of the weights.
pub fn measure_checksum<T: Real>(weights: &[T]) -> String {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.as_f64().to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

/// Rates over a strictly increasing grid, levels solved in parallel.
pub fn rate_curve<T: Real>(
    space: Arc<StateSpace<T>>,
    grid: &[T],
    config: SolverConfig<T>,
) -> Result<RateCurve<T>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("level grid must be strictly increasing"));
    }
    let (lo, hi) = space.attainable_range();
    if let Some(&x) = grid.iter().find(|&&x| !(x >= lo && x <= hi)) {
        return Err(Error::InfeasibleLevel { level: x.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    let solver = RateSolver::new(space.clone(), config)?;
    let records = grid
        .par_iter()
        .map(|&x| {
            solver.solve(x).map(|p| RateRecord {
                x: p.x,
                rate: p.rate,
                lambda: p.lambda,
                iterations: p.iterations,
                converged: p.converged,
                measure_checksum: measure_checksum(p.measure.weights()),
                diagnostics: p.diagnostics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurve {
        mode: space.mode().clone(),
        mode_label: space.mode().label(),
        kernel: space.mode().kernel_label().to_string(),
        reference_level: solver.reference_level(),
        solver: solver.config().clone(),
        records,
    })
}

/// `n` equally spaced levels covering `[lo, hi]`.
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if n < 2 || !(lo < hi) {
        return Err(Error::domain("grid needs n >= 2 and lo < hi"));
    }
    let step = (hi - lo) / T::of_u64(n as u64 - 1);
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * T::of_u64(i as u64) })
        .collect())
}
