use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "gcd-density",
    version,
    about = "Limit theorems for the density of gcds of uniform random integers"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Base seed; replica r draws from ChaCha stream r of this seed.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
    /// Report path. Defaults to `<command>.<format>` inside $GCDLIMIT_OUT_DIR
    /// when that is set, otherwise standard output.
    #[arg(long, short, global = true)]
    pub out: Option<std::path::PathBuf>,
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Run the command's brute-force oracle at reduced size first and abort on mismatch.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Csv,
    Json,
}

impl OutFormat {
    pub fn ext(self) -> &'static str {
        match self {
            OutFormat::Csv => "csv",
            OutFormat::Json => "json",
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Empirical density of ordered pairs with gcd ell.
    Lln(LlnArgs),
    /// Exact finite-n probabilities and variance.
    Exact(ExactArgs),
    /// Replica ensembles, KS distance and the dependency-graph bound.
    Clt(CltArgs),
    /// Truncated rate function over a grid of levels.
    Ldp(LdpArgs),
    /// Square-free counts, Monte Carlo frequency and rate.
    Squarefree(SquarefreeArgs),
    /// Density of coprime d-tuples.
    Dgcd(DgcdArgs),
    /// CRT coupling between uniform draws and the product law.
    Coupling(CouplingArgs),
    /// Tail-bound experiments on sums of squared divisor counts.
    Tails(TailsArgs),
    /// Print the declared report columns or fields for a command.
    Schema(SchemaArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lln(_) => "lln",
            Command::Exact(_) => "exact",
            Command::Clt(_) => "clt",
            Command::Ldp(_) => "ldp",
            Command::Squarefree(_) => "squarefree",
            Command::Dgcd(_) => "dgcd",
            Command::Coupling(_) => "coupling",
            Command::Tails(_) => "tails",
            Command::Schema(_) => "schema",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LlnArgs {
    #[arg(long, value_delimiter = ',', default_value = "100000", value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = clap::value_parser!(u64).range(1..))]
    pub ell: Vec<u64>,
    /// Draws per batch (default: n).
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000", value_parser = clap::value_parser!(u64).range(3..))]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub ell: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DMode {
    Paper,
    Recount,
}

#[derive(Debug, Args, Serialize)]
pub struct CltArgs {
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000", value_parser = clap::value_parser!(u64).range(3..))]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub ell: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
    pub d: u32,
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    /// Scale by 2 sigma^2 n^(3/2) as printed, instead of 2 sigma n^(3/2).
    #[arg(long)]
    pub scale_literal_paper: bool,
    /// Dependency degree: 2n-5 (paper) or 2n-3 (recount).
    #[arg(long, value_enum, default_value_t = DMode::Recount)]
    pub d_mode: DMode,
}

#[derive(Debug, Args, Serialize)]
pub struct LdpArgs {
    /// Truncation level(s): a single k, a list `2,4,8`, or a ladder `2..12`.
    #[arg(long, default_value = "2..12", value_parser = parse_ladder)]
    pub k: Ladder,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub ell: u64,
    /// Levels as `lo:hi:count`.
    #[arg(long, default_value = "0:1:21", value_parser = parse_grid)]
    pub grid: GridSpec,
    /// Read the ternary rule as "no common 1 or 2" instead of the divisibility rule.
    #[arg(long)]
    pub strict_phrase_kernel: bool,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 50.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SquarefreeArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000000", value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Vec<u64>,
    /// Monte Carlo draws per n (default: n).
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct DgcdArgs {
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(2..))]
    pub d: u32,
    #[arg(long, value_delimiter = ',', default_value = "100000", value_parser = clap::value_parser!(u64).range(3..))]
    pub n: Vec<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Also build a normalised ensemble with this many replicas.
    #[arg(long, default_value_t = 0)]
    pub replicas: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CouplingArgs {
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Prime window `k1,k2` meaning primes p with k1 < p <= k2.
    #[arg(long, default_value = "1,11", value_parser = parse_window)]
    pub window: WindowSpec,
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Threshold for the log-scale coupling bound column.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    Uniform,
    Product,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct TailsArgs {
    #[arg(long, default_value = "3,50", value_parser = parse_window)]
    pub window: WindowSpec,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = MeasureArg::Both)]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SchemaArgs {
    /// Command whose schema to print.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Ladder(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowSpec {
    pub k1: u64,
    pub k2: u64,
}

pub fn parse_ladder(s: &str) -> Result<Ladder, String> {
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("bad ladder start: {e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("bad ladder end: {e}"))?;
        if a > b {
            return Err(format!("empty ladder {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|e| format!("bad k '{t}': {e}")))
            .collect::<Result<_, _>>()?
    };
    if ks.contains(&0) {
        return Err("k must be >= 1".into());
    }
    Ok(Ladder(ks))
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(format!("grid '{s}' is not lo:hi:count"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("bad grid start: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad grid end: {e}"))?;
    let count: usize = count.parse().map_err(|e| format!("bad grid count: {e}"))?;
    if count == 0 || (count == 1 && lo != hi) || (count > 1 && !(lo < hi)) {
        return Err(format!("grid '{s}' needs lo < hi and count >= 2, or lo = hi and count = 1"));
    }
    Ok(GridSpec { lo, hi, count })
}

pub fn parse_window(s: &str) -> Result<WindowSpec, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("window '{s}' is not k1,k2"))?;
    let k1: u64 = a.trim().parse().map_err(|e| format!("bad k1: {e}"))?;
    let k2: u64 = b.trim().parse().map_err(|e| format!("bad k2: {e}"))?;
    if k1 >= k2 {
        return Err(format!("window needs k1 < k2, got {k1},{k2}"));
    }
    Ok(WindowSpec { k1, k2 })
}
