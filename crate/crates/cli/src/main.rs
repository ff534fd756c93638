//! `matscat`: run scattering scenarios from a JSON config and write CSV/JSON artifacts.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::config::{Format, Scenario};
use crate::output::Report;

#[derive(Debug, Parser)]
#[command(name = "matscat", version, about = "Matrix Schrödinger scattering on the half line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON scenario file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `--set k_grid.count=50`.
    #[arg(long = "set", value_name = "K=V", global = true)]
    sets: Vec<String>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Do not echo the summary to stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
#[command(rename_all = "kebab-case")]
enum Command {
    /// Check the Hermiticity and rank conditions on (A, B).
    ValidateBc,
    /// Diagonal normal form: channel angles, M, T₁ and S∞.
    NormalForm,
    /// Scattering matrix on the k grid.
    Smatrix,
    /// Bound states from det J(iκ) = 0.
    BoundStates,
    /// Spectral shift function on the energy grid.
    Ssf,
    /// Levinson check at zero energy.
    Levinson,
    /// Resolvent kernel on the x grid.
    Resolvent,
    /// Parseval and scattering-operator checks for the generalized Fourier maps.
    TransformsCheck,
    /// Trace formula with f(E) = 1/(E + shift).
    TraceCheck,
    /// High-energy remainder of S and its log-log slope.
    Asymptotics,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ValidateBc => "validate-bc",
            Command::NormalForm => "normal-form",
            Command::Smatrix => "smatrix",
            Command::BoundStates => "bound-states",
            Command::Ssf => "ssf",
            Command::Levinson => "levinson",
            Command::Resolvent => "resolvent",
            Command::TransformsCheck => "transforms-check",
            Command::TraceCheck => "trace-check",
            Command::Asymptotics => "asymptotics",
        }
    }

    fn run(self, s: &Scenario) -> Result<Report, CliError> {
        match self {
            Command::ValidateBc => commands::validate_bc(s),
            Command::NormalForm => commands::normal_form(s),
            Command::Smatrix => commands::smatrix(s),
            Command::BoundStates => commands::bound_states_cmd(s),
            Command::Ssf => commands::ssf_cmd(s),
            Command::Levinson => commands::levinson(s),
            Command::Resolvent => commands::resolvent(s),
            Command::TransformsCheck => commands::transforms_check(s),
            Command::TraceCheck => commands::trace_check(s),
            Command::Asymptotics => commands::asymptotics(s),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// `line` is reported in error.json; serde's message already mentions it.
    #[error("configuration error{}: {message}", field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default())]
    Config { field: Option<String>, line: Option<usize>, message: String },
    #[error(transparent)]
    Library(#[from] matscat::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config { field: Some(field.to_string()), line: None, message: message.into() }
    }

    /// Invalid input exits with 2, numerical failure with 3.
    fn is_validation(&self) -> bool {
        match self {
            CliError::Config { .. } => true,
            CliError::Library(e) => {
                matches!(e.origin(), "bc" | "potential")
                    || matches!(e.name(), "InvalidArgument" | "ChannelMismatch" | "InvalidGrid" | "ZeroK")
            }
            CliError::Io(_) => false,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            e if e.is_validation() => 2,
            _ => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let kind = match self.exit_code() {
            2 => "validation",
            3 => "numerical",
            _ => "io",
        };
        let mut v = json!({ "exit_code": self.exit_code(), "kind": kind, "message": self.to_string() });
        match self {
            CliError::Config { field, line, .. } => {
                v["module"] = json!("cli");
                v["error"] = json!("ConfigError");
                v["field"] = json!(field);
                v["line"] = json!(line);
            }
            CliError::Library(e) => {
                v["module"] = json!(e.origin());
                v["error"] = json!(e.name());
            }
            CliError::Io(_) => {
                v["module"] = json!("cli");
                v["error"] = json!("Io");
            }
        }
        v
    }
}

macro_rules! library_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Library(e.into())
            }
        }
    )*};
}

library_errors!(
    matscat::bc::BcError,
    matscat::potential::PotentialError,
    matscat::transforms::TransformError
);

fn execute(cli: &Cli, out_dir: &mut PathBuf) -> Result<(Report, Vec<Format>), CliError> {
    let config = config::load(cli.config.as_deref(), &cli.sets)?;
    if cli.out.is_none() {
        *out_dir = PathBuf::from(&config.output.dir);
    }
    let formats = config.output.formats.clone();
    let scenario = Scenario::resolve(config)?;
    let report = cli.command.run(&scenario)?;
    Ok((report, formats))
}

fn write_error(dir: &Path, err: &CliError) {
    let text = serde_json::to_string_pretty(&err.to_json()).expect("JSON values always serialise");
    if std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("error.json"), text + "\n")).is_err() {
        eprintln!("matscat: could not write error.json to {}", dir.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("matscat: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let command = cli.command.name();
    let err = match execute(&cli, &mut out_dir) {
        Ok((report, formats)) => match output::write_artifacts(&out_dir, command, &report, &formats) {
            Ok(()) => {
                if !cli.quiet {
                    print!("{}", report.summary);
                }
                match report.failure {
                    None => return ExitCode::SUCCESS,
                    Some(e) => e,
                }
            }
            Err(e) => e,
        },
        Err(e) => e,
    };
    eprintln!("matscat {command}: {err}");
    write_error(&out_dir, &err);
    ExitCode::from(err.exit_code())
}
