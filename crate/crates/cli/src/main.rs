mod args;
mod check;
mod commands;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gcd_density::report::{report_schema, write_json};
use serde_json::json;

use args::{Cli, Command, OutFormat};

/// Failure carried to `main`: exit code plus a machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn check(message: impl Into<String>) -> Self {
        Self { code: 3, kind: "check_failed", message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: 1, kind: "io", message: message.into() }
    }
}

impl From<gcd_density::Error> for CliError {
    fn from(e: gcd_density::Error) -> Self {
        use gcd_density::Error as E;
        let kind = match &e {
            E::Domain(_) => "domain",
            E::Precondition(_) => "precondition",
            E::InfeasibleLevel { .. } => "infeasible_level",
            E::InfeasibleCoupling { .. } => "infeasible_coupling",
            E::Capacity(_) => "capacity",
            E::Unsupported(_) => "unsupported",
            E::Report(_) => "io",
        };
        let code = if e.is_math() { 3 } else { 1 };
        Self { code, kind, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({
                "error": e.kind,
                "message": e.message,
                "command": cli.command.name(),
                "exit_code": e.code,
            });
            eprintln!("{record}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if g.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(g.threads)
            .build_global()
            .map_err(|e| CliError::io(e.to_string()))?;
    }

    if let Command::Schema(a) = &cli.command {
        let cols = report_schema(g.format.ext(), &a.command)?;
        let mut out = open_output(cli, "schema")?;
        match g.format {
            OutFormat::Csv => writeln!(out, "{}", cols.join(",")),
            OutFormat::Json => writeln!(out, "{}", json!({ "command": a.command, "fields": cols })),
        }
        .map_err(|e| CliError::io(e.to_string()))?;
        return out.flush().map_err(|e| CliError::io(e.to_string()));
    }

    if g.check {
        check::run(&cli.command)?;
    }

    let seed = g.seed;
    let mut report = match &cli.command {
        Command::Lln(a) => commands::lln(a, seed)?,
        Command::Exact(a) => commands::exact(a)?,
        Command::Clt(a) => commands::clt(a, seed)?,
        Command::Ldp(a) => commands::ldp(a, seed)?,
        Command::Squarefree(a) => commands::squarefree(a, seed)?,
        Command::Dgcd(a) => commands::dgcd(a, seed)?,
        Command::Coupling(a) => commands::coupling(a, seed)?,
        Command::Tails(a) => commands::tails(a, seed)?,
        Command::Schema(_) => unreachable!("handled above"),
    };

    let config = serde_json::to_value(cli).map_err(|e| CliError::io(e.to_string()))?;
    let name = cli.command.name();
    let mut out = open_output(cli, name)?;
    match g.format {
        OutFormat::Csv => {
            report.table.meta("seed", seed).meta("config", config.to_string());
            report.table.write_csv(&mut out)?;
        }
        OutFormat::Json => {
            let obj = report.json.as_object_mut().expect("payloads are objects");
            obj.insert("config".into(), config);
            obj.insert("seed".into(), seed.into());
            write_json(&mut out, name, &report.json)?;
            writeln!(out).map_err(|e| CliError::io(e.to_string()))?;
        }
    }
    out.flush().map_err(|e| CliError::io(e.to_string()))
}

fn open_output(cli: &Cli, name: &str) -> Result<Box<dyn Write>, CliError> {
    let path: Option<PathBuf> = cli.global.out.clone().or_else(|| {
        std::env::var_os("GCDLIMIT_OUT_DIR")
            .map(|dir| PathBuf::from(dir).join(format!("{name}.{}", cli.global.format.ext())))
    });
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
            }
            let f = File::create(&p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}
