mod commands;
mod config;
mod output;

use anyhow::Result;
use clap::{Parser, Subcommand};
use commands::Outcome;
use config::{ConfigError, ConfigFile};
use output::{sha256_hex, sibling, write_atomic, Manifest, MANIFEST_SCHEMA};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Arboreal gas, H^{0|2} checks, finite-range decompositions and RG flows.
#[derive(Parser, Debug)]
#[command(name = "arboreal", version)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path. The manifest and report go next to it as
    /// `<stem>.manifest.json` and `<stem>.report.json`. Without it the CSV is
    /// printed to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact observables by forest enumeration.
    ExactCheck(config::GraphParams),
    /// Compare the fermionic model with the forest measure.
    WardCheck(config::GraphParams),
    /// Metropolis estimates of forest observables.
    Sample(config::SampleParams),
    /// Finite-range decomposition kernels and contract report.
    Frd(config::FrdParams),
    /// Coupling flow trajectory across scales.
    Flow(config::FlowParams),
    /// Torus Green function, or extrapolated Z^d values.
    Green(config::GreenParams),
    /// Ghost-connection probability over a list of beta values.
    ThetaScan(config::ThetaScanParams),
    /// Exponential fit of the connection probability along an axis.
    DecayFit(config::DecayFitParams),
}

enum Failure {
    Config(String),
    Invariant(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invariant(_) | Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
        }
    }

    fn report(&self) -> ExitCode {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Invariant(m) => ("invariant", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        let record = serde_json::json!({ "error": { "kind": kind, "message": message }, "exit_code": self.code() });
        eprintln!("{record}");
        ExitCode::from(self.code())
    }
}

fn classify(e: anyhow::Error) -> Failure {
    if let Some(c) = e.downcast_ref::<ConfigError>() {
        Failure::Config(c.0.clone())
    } else {
        Failure::Runtime(format!("{e:#}"))
    }
}

/// Resolve one subcommand: file block overlaid by flags, then defaults.
fn resolve(cli: &Cli, file: ConfigFile) -> Result<(String, ConfigFile)> {
    let out = cli.out.as_ref().map(|p| p.display().to_string()).or(file.out.clone());
    let mut r = ConfigFile { out, ..Default::default() };
    let name = match &cli.command {
        Command::ExactCheck(p) => {
            r.exact_check = Some(commands::resolve_graph(config::overlay(file.exact_check, p)?, false)?);
            "exact-check"
        }
        Command::WardCheck(p) => {
            r.ward_check = Some(commands::resolve_graph(config::overlay(file.ward_check, p)?, true)?);
            "ward-check"
        }
        Command::Sample(p) => {
            r.sample = Some(commands::resolve_sample(config::overlay(file.sample, p)?)?);
            "sample"
        }
        Command::Frd(p) => {
            r.frd = Some(commands::resolve_frd(config::overlay(file.frd, p)?)?);
            "frd"
        }
        Command::Flow(p) => {
            r.flow = Some(commands::resolve_flow(config::overlay(file.flow, p)?)?);
            "flow"
        }
        Command::Green(p) => {
            r.green = Some(commands::resolve_green(config::overlay(file.green, p)?)?);
            "green"
        }
        Command::ThetaScan(p) => {
            r.theta_scan = Some(commands::resolve_theta_scan(config::overlay(file.theta_scan, p)?)?);
            "theta-scan"
        }
        Command::DecayFit(p) => {
            r.decay_fit = Some(commands::resolve_decay_fit(config::overlay(file.decay_fit, p)?)?);
            "decay-fit"
        }
    };
    Ok((name.to_string(), r))
}

fn execute(r: &ConfigFile) -> Result<(Outcome, Option<u64>)> {
    Ok(if let Some(p) = &r.exact_check {
        (commands::run_exact_check(p)?, None)
    } else if let Some(p) = &r.ward_check {
        (commands::run_ward_check(p)?, None)
    } else if let Some(p) = &r.sample {
        (commands::run_sample(p)?, p.seed)
    } else if let Some(p) = &r.frd {
        (commands::run_frd(p)?, None)
    } else if let Some(p) = &r.flow {
        (commands::run_flow(p)?, None)
    } else if let Some(p) = &r.green {
        (commands::run_green(p)?, None)
    } else if let Some(p) = &r.theta_scan {
        (commands::run_theta_scan(p)?, p.seed)
    } else if let Some(p) = &r.decay_fit {
        (commands::run_decay_fit(p)?, p.seed)
    } else {
        unreachable!("one block is always resolved")
    })
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let file = match &cli.config {
        Some(p) => config::load(p).map_err(classify)?,
        None => ConfigFile::default(),
    };
    let (name, resolved) = resolve(&cli, file).map_err(classify)?;
    let config_text = toml::to_string(&resolved).map_err(|e| Failure::Runtime(e.to_string()))?;
    let (outcome, seed) = execute(&resolved).map_err(classify)?;

    match &resolved.out {
        None => print!("{}", outcome.csv),
        Some(path) => {
            let path = PathBuf::from(path);
            let io = |e: anyhow::Error| Failure::Runtime(format!("{e:#}"));
            write_atomic(&path, outcome.csv.as_bytes()).map_err(io)?;
            let mut outputs = vec![path.display().to_string()];
            if let Some(report) = &outcome.report {
                let rp = sibling(&path, "report.json");
                let text = serde_json::to_string_pretty(report).map_err(|e| io(e.into()))?;
                write_atomic(&rp, text.as_bytes()).map_err(io)?;
                outputs.push(rp.display().to_string());
            }
            let manifest = Manifest {
                schema: MANIFEST_SCHEMA,
                tool: "arboreal",
                version: env!("CARGO_PKG_VERSION"),
                subcommand: name,
                config_sha256: sha256_hex(config_text.as_bytes()),
                config: config_text,
                seed,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                outputs,
                status: if outcome.failure.is_some() { "failed" } else { "ok" },
            };
            let text = serde_json::to_string_pretty(&manifest).map_err(|e| io(e.into()))?;
            write_atomic(&sibling(&path, "manifest.json"), text.as_bytes()).map_err(io)?;
        }
    }
    match outcome.failure {
        Some(m) => Err(Failure::Invariant(m)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return Failure::Config(e.to_string().trim().to_string()).report(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
