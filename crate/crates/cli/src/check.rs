//! Reduced-size brute-force gates run before a command when `--check` is set.

use std::sync::Arc;

use gcd_density::brute;
use gcd_density::exact::{exact_pair_count, exact_variance, squarefree_count};
use gcd_density::ldp::{k1_rate, MixedKernel, RateSolver, SolverConfig, StateSpace};
use gcd_density::primes::{PrimeTable, PrimeWindow};
use gcd_density::sampler::{dgcd_tuple_count, divisor_counts, gcd_pair_count, sample_uniform};

use crate::args::Command;
use crate::CliError;

const SMALL_N: u64 = 300;

pub fn run(cmd: &Command) -> Result<(), CliError> {
    let table = PrimeTable::new(1000)?;
    match cmd {
        Command::Lln(a) => {
            for &ell in &a.ell {
                sampled_pairs(ell, &table)?;
            }
        }
        Command::Exact(a) => exact_counts(a.ell, &table)?,
        Command::Clt(a) => exact_counts(a.ell, &table)?,
        Command::Ldp(_) => one_digit_rate()?,
        Command::Squarefree(_) => {
            let got = squarefree_count(SMALL_N, &table)?;
            let want = brute::squarefree_count(SMALL_N);
            expect(got == want, format!("square-free count {got} != brute {want}"))?;
        }
        Command::Dgcd(a) => {
            let batch = sample_uniform(SMALL_N, 40, 1, 0)?;
            let got = dgcd_tuple_count(&batch, a.d.min(3), &table)?;
            let want = brute::dtuple_coprime_count(&batch.values, a.d.min(3));
            expect(got == Some(want as i128), format!("coprime tuples {got:?} != brute {want}"))?;
        }
        Command::Coupling(_) | Command::Tails(_) => {
            let batch = sample_uniform(SMALL_N, 200, 1, 0)?;
            let window = PrimeWindow::new(3, 50)?;
            let profile = divisor_counts(&batch, window, &table)?;
            let want = brute::divisor_counts(&batch.values, &profile.primes);
            expect(profile.counts == want, "divisor counts disagree with trial division".to_string())?;
        }
        Command::Schema(_) => {}
    }
    Ok(())
}

fn expect(ok: bool, msg: String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::check(msg))
    }
}

fn sampled_pairs(ell: u64, table: &PrimeTable) -> Result<(), CliError> {
    let batch = sample_uniform(SMALL_N, 200, 1, 0)?;
    let got = gcd_pair_count(&batch, ell, table)?;
    let want = brute::pair_count(&batch.values, ell) as u128;
    expect(got == want, format!("pair count for ell={ell}: {got} != brute {want}"))
}

fn exact_counts(ell: u64, table: &PrimeTable) -> Result<(), CliError> {
    let got = exact_pair_count(SMALL_N, ell, table)?;
    let want = brute::pair_count_range(SMALL_N, ell) as u128;
    expect(got == want, format!("exact pair count {got} != brute {want}"))?;
    let n = 6;
    let s = exact_variance::<f64>(n, ell, table)?;
    let want = brute::offdiag_variance(n, ell);
    expect(s.sigma_n_sq_exact == want, format!("exact variance at n={n} disagrees with enumeration"))
}

fn one_digit_rate() -> Result<(), CliError> {
    let table = PrimeTable::new(100)?;
    let space = Arc::new(StateSpace::<f64>::for_gcd(1, 1, MixedKernel::Divisibility, &table)?);
    let solver = RateSolver::new(space, SolverConfig::default())?;
    for x in [0.1, 0.5, 0.9] {
        let got = solver.solve(x)?.rate;
        let want = k1_rate(x)?;
        expect((got - want).abs() < 1e-6, format!("k=1 rate at {x}: {got} vs closed form {want}"))?;
    }
    Ok(())
}
