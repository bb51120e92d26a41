use std::sync::Arc;

use gcd_density::clt::{
    convergence_fit, ks_report, replicate_statistic, ConvergenceFit, DegreeMode, KSReport, ScaleConvention,
};
use gcd_density::exact::{exact_pair_prob, exact_variance, limit_variance, squarefree_count};
use gcd_density::ldp::{rate_curve, MixedKernel, RateCurve, SolverConfig, StateSpace};
use gcd_density::primes::{euler_product, EulerFamily, PrimeTable, PrimeWindow};
use gcd_density::report::{fmt_num, report_schema, Table};
use gcd_density::sampler::{
    crt_coupling, empirical_dgcd_density, empirical_gcd_density, gcd_pair_count, pattern_chi_square,
    sample_uniform, squarefree_frequency,
};
use gcd_density::scalar::six_over_pi_sq;
use gcd_density::tails::{coupling_bound, mc_tail_estimate, TailExperiment, TailMeasure};
use gcd_density::{squarefree_rate, Error};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::CliError;

/// A finished experiment: the CSV table and the JSON document.
pub struct Report {
    pub table: Table,
    pub json: Value,
}

/// Sieve limit used whenever Euler products enter: at least `10^6`.
const EULER_LIMIT: usize = 1_000_000;

fn table_for(bound: u64) -> Result<PrimeTable, Error> {
    PrimeTable::new((bound as usize).max(EULER_LIMIT))
}

fn new_table(command: &str) -> Result<Table, CliError> {
    Ok(Table::new(command, report_schema("csv", command)?))
}

fn n(x: f64) -> String {
    fmt_num(x)
}

pub fn lln(a: &LlnArgs, seed: u64) -> Result<Report, CliError> {
    let table = table_for(*a.n.iter().max().expect("clap default"))?;
    let mut t = new_table("lln")?;
    let mut rows = Vec::new();
    for (i, &nn) in a.n.iter().enumerate() {
        let count = a.count.unwrap_or(nn as usize);
        let batch = sample_uniform(nn, count, seed, i as u64)?;
        for &ell in &a.ell {
            let pairs = gcd_pair_count(&batch, ell, &table)?;
            let empirical: f64 = empirical_gcd_density(&batch, ell, &table)?;
            let reference = six_over_pi_sq::<f64>() / (ell * ell) as f64;
            let exact = exact_pair_prob(nn, ell, &table)?;
            let exact = *exact.numer() as f64 / *exact.denom() as f64;
            t.push(vec![
                ell.to_string(),
                nn.to_string(),
                count.to_string(),
                pairs.to_string(),
                n(empirical),
                n(reference),
                n((empirical - reference).abs()),
                n(exact),
            ])?;
            rows.push(json!({
                "ell": ell, "n": nn, "count": count, "pairs": pairs.to_string(),
                "empirical": empirical, "reference": reference,
                "abs_error": (empirical - reference).abs(), "exact": exact, "stream_id": i,
            }));
        }
    }
    Ok(Report { table: t, json: json!({ "rows": rows }) })
}

pub fn exact(a: &ExactArgs) -> Result<Report, CliError> {
    let table = table_for(*a.n.iter().max().expect("clap default"))?;
    let limit = limit_variance::<f64>(a.ell, 2, &table)?;
    let mut t = new_table("exact")?;
    let mut rows = Vec::new();
    for &nn in &a.n {
        let s = exact_variance::<f64>(nn, a.ell, &table)?;
        let per_n3 = s.sigma_n_sq / (nn as f64).powi(3);
        t.push(vec![
            nn.to_string(),
            a.ell.to_string(),
            n(s.alpha()),
            n(s.beta()),
            n(s.sigma_n_sq),
            n(per_n3),
            n(limit.value),
        ])?;
        rows.push(json!({
            "n": nn, "ell": a.ell,
            "alpha_num": s.alpha_num.to_string(), "beta_num": s.beta_num.to_string(),
            "alpha_n": s.alpha(), "beta_n": s.beta(),
            "sigma_n_sq_exact": s.sigma_n_sq_exact.to_string(),
            "sigma_n_sq": s.sigma_n_sq, "sigma_n_sq_over_n3": per_n3,
            "limit_variance": limit,
        }));
    }
    Ok(Report { table: t, json: json!({ "rows": rows }) })
}

#[derive(Serialize)]
struct CltRow {
    #[serde(flatten)]
    report: Option<KSReport<f64>>,
    n: u64,
    mean: f64,
    variance: f64,
    d_ks: f64,
}

pub fn clt(a: &CltArgs, seed: u64) -> Result<Report, CliError> {
    let table = table_for(*a.n.iter().max().expect("clap default"))?;
    let convention = if a.scale_literal_paper {
        ScaleConvention::SigmaSquared
    } else {
        ScaleConvention::Sigma
    };
    let d_mode = match a.d_mode {
        DMode::Paper => DegreeMode::Paper,
        DMode::Recount => DegreeMode::Recount,
    };
    let mut rows = Vec::new();
    for (i, &nn) in a.n.iter().enumerate() {
        // Disjoint seeds per n keep ensembles independent across rows.
        let ens = replicate_statistic::<f64>(nn, a.ell, a.d, a.replicas, seed.wrapping_add(i as u64), convention, &table)?;
        let report = if a.d == 2 { Some(ks_report(&ens, d_mode, &table)?) } else { None };
        let d_ks = gcd_density::clt::ks_distance(&ens.values)?;
        rows.push(CltRow { report, n: nn, mean: ens.mean(), variance: ens.variance(), d_ks });
    }
    let points: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, r.d_ks)).collect();
    let fit: Option<ConvergenceFit<f64>> = if points.len() >= 3 { convergence_fit(&points).ok() } else { None };
    let mut t = new_table("clt")?;
    t.meta("scale", format!("{convention:?}")).meta("D_mode", format!("{d_mode:?}"));
    for r in &rows {
        let (bound, vacuous, degree) = match &r.report {
            Some(k) => (n(k.baldi_bound), k.vacuous.to_string(), k.dependency_degree.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        t.push(vec![
            r.n.to_string(),
            a.replicas.to_string(),
            n(r.mean),
            n(r.variance),
            n(r.d_ks),
            bound,
            vacuous,
            degree,
            fit.map(|f| n(f.slope)).unwrap_or_default(),
        ])?;
    }
    let d_ks: Vec<f64> = rows.iter().map(|r| r.d_ks).collect();
    let bounds: Vec<Option<f64>> = rows.iter().map(|r| r.report.as_ref().map(|k| k.baldi_bound)).collect();
    Ok(Report {
        table: t,
        json: json!({
            "reports": rows, "d_ks": d_ks, "baldi_bound": bounds,
            "D_mode": d_mode, "scale": convention, "fit": fit,
        }),
    })
}

pub fn ldp(a: &LdpArgs, seed: u64) -> Result<Report, CliError> {
    let kernel = if a.strict_phrase_kernel {
        MixedKernel::StrictPhrase
    } else {
        MixedKernel::Divisibility
    };
    let table = PrimeTable::new(10_000)?;
    let grid = if a.grid.count == 1 {
        vec![a.grid.lo]
    } else {
        gcd_density::ldp::uniform_grid(a.grid.lo, a.grid.hi, a.grid.count)?
    };
    let config = SolverConfig {
        damping: a.damping,
        tol: a.tol,
        max_iter: a.max_iter,
        lambda_window: (-a.lambda_max, a.lambda_max),
        restarts: a.restarts,
        seed,
    };
    let mut curves: Vec<(usize, RateCurve<f64>)> = Vec::new();
    for &k in &a.k.0 {
        let space = Arc::new(StateSpace::<f64>::for_gcd(a.ell, k, kernel, &table)?);
        curves.push((k, rate_curve(space, &grid, config.clone())?));
    }
    let mut t = new_table("ldp")?;
    t.meta("ell", a.ell).meta("kernel", curves[0].1.kernel.clone());
    for (k, c) in &curves {
        for r in &c.records {
            t.push(vec![
                n(r.x),
                n(r.rate),
                n(r.lambda),
                r.iterations.to_string(),
                r.converged.to_string(),
                k.to_string(),
                n(c.reference_level),
                n(r.diagnostics.level_residual),
                r.diagnostics.mixture.to_string(),
                r.measure_checksum.clone(),
            ])?;
        }
    }
    let curves: Vec<Value> = curves
        .into_iter()
        .map(|(k, c)| json!({ "k": k, "curve": c }))
        .collect();
    Ok(Report { table: t, json: json!({ "curves": curves }) })
}

pub fn squarefree(a: &SquarefreeArgs, seed: u64) -> Result<Report, CliError> {
    let table = table_for(*a.n.iter().max().expect("clap default"))?;
    let c = six_over_pi_sq::<f64>();
    let mut t = new_table("squarefree")?;
    let mut rows = Vec::new();
    for (i, &nn) in a.n.iter().enumerate() {
        let q = squarefree_count(nn, &table)?;
        let draws = a.count.unwrap_or(nn as usize);
        let batch = sample_uniform(nn, draws, seed, i as u64)?;
        let freq: f64 = squarefree_frequency(&batch, &table)?;
        let rate: f64 = squarefree_rate(freq)?;
        let density = q as f64 / nn as f64;
        t.push(vec![
            nn.to_string(),
            q.to_string(),
            n(density),
            n(c),
            draws.to_string(),
            n(freq),
            n(rate),
        ])?;
        rows.push(json!({
            "n": nn, "count": q, "density": density, "reference": c,
            "draws": draws, "mc_frequency": freq, "rate_at_frequency": rate,
        }));
    }
    Ok(Report { table: t, json: json!({ "rows": rows }) })
}

pub fn dgcd(a: &DgcdArgs, seed: u64) -> Result<Report, CliError> {
    let table = table_for(*a.n.iter().max().expect("clap default"))?;
    let reference = euler_product::<f64>(EulerFamily::CoprimePair(a.d), table.limit() as u64, &table)?;
    let mut t = new_table("dgcd")?;
    let mut rows = Vec::new();
    for (i, &nn) in a.n.iter().enumerate() {
        let count = a.count.unwrap_or(nn as usize);
        let batch = sample_uniform(nn, count, seed, i as u64)?;
        let got: f64 = empirical_dgcd_density(&batch, a.d, &table)?;
        let ens = if a.replicas > 0 {
            Some(replicate_statistic::<f64>(
                nn,
                1,
                a.d,
                a.replicas,
                seed.wrapping_add(1 + i as u64),
                ScaleConvention::Sigma,
                &table,
            )?)
        } else {
            None
        };
        let var = ens.as_ref().map(|e| e.variance());
        t.push(vec![
            a.d.to_string(),
            nn.to_string(),
            count.to_string(),
            n(got),
            n(reference.value),
            n((got - reference.value).abs()),
            a.replicas.to_string(),
            var.map(n).unwrap_or_default(),
        ])?;
        rows.push(json!({
            "d": a.d, "n": nn, "count": count, "empirical": got, "reference": reference,
            "abs_error": (got - reference.value).abs(), "replicas": a.replicas,
            "ensemble_variance": var,
        }));
    }
    Ok(Report { table: t, json: json!({ "rows": rows }) })
}

pub fn coupling(a: &CouplingArgs, seed: u64) -> Result<Report, CliError> {
    let window = PrimeWindow::new(a.window.k1, a.window.k2)?;
    let table = table_for(a.window.k2)?;
    let batch = crt_coupling(a.n, window, a.draws, seed, &table)?;
    let chi = pattern_chi_square(&batch.tilde_patterns(), &batch.primes)?;
    let p = 1.0 / batch.m as f64;
    let se = (p * (1.0 - p) / a.draws as f64).sqrt();
    let bound: f64 = coupling_bound(a.n, batch.m, a.epsilon, a.window.k2)?;
    let mut t = new_table("coupling")?;
    t.push(vec![
        a.n.to_string(),
        window.to_string(),
        batch.m.to_string(),
        a.draws.to_string(),
        n(batch.mismatch_rate()),
        n(p),
        n(se),
        n(chi.statistic),
        chi.dof.to_string(),
        n(chi.p_value),
        n(bound),
    ])?;
    Ok(Report {
        table: t,
        json: json!({ "rows": [{
            "n": a.n, "window": window, "primes": batch.primes, "m": batch.m,
            "threshold": batch.threshold, "draws": a.draws,
            "mismatch_rate": batch.mismatch_rate(), "mismatch_bound": p, "mismatch_se": se,
            "chi_square": chi, "epsilon": a.epsilon, "log_coupling_bound": bound,
        }]}),
    })
}

pub fn tails(a: &TailsArgs, seed: u64) -> Result<Report, CliError> {
    let window = PrimeWindow::new(a.window.k1, a.window.k2)?;
    let table = table_for(a.n.max(a.window.k2))?;
    let measures: &[TailMeasure] = match a.measure {
        MeasureArg::Uniform => &[TailMeasure::Uniform],
        MeasureArg::Product => &[TailMeasure::Product],
        MeasureArg::Both => &[TailMeasure::Uniform, TailMeasure::Product],
    };
    let mut t = new_table("tails")?;
    let mut experiments: Vec<TailExperiment<f64>> = Vec::new();
    for &m in measures {
        let e = mc_tail_estimate::<f64>(window, a.n, a.epsilon, m, a.replicas, seed, &table)?;
        t.push(vec![
            format!("{m:?}").to_lowercase(),
            window.to_string(),
            a.n.to_string(),
            n(a.epsilon),
            a.replicas.to_string(),
            e.exceedances.to_string(),
            n(e.empirical_log_prob_point),
            n(e.empirical_log_prob_ucb),
            e.analytic_bound.map(n).unwrap_or_default(),
            e.analytic_formula.clone(),
        ])?;
        experiments.push(e);
    }
    Ok(Report { table: t, json: json!({ "experiments": experiments }) })
}
