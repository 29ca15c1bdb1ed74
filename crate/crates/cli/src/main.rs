//! `memwit`: witness evaluation and batch reproduction runs.

mod repro;

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use memwit::families::{self, ThermalAdParams, ToyKind, ToyModelParams};
use memwit::witness::{evaluate_witness, WitnessJson, DEFAULT_DECISION_TOL};
use memwit::QuantumChannel;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] memwit::Error),
    #[error("missing required flag --{0} for this family")]
    MissingFlag(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "memwit", version, about = "Quantum-memory witness for two-step and time-continuous qubit dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the witness on one two-step dynamics and print the JSON report
    /// {c_assist_t1, c_form_t2, margin, verdict, t1, t2, params}.
    /// Exit code: 0 certified, 1 inconclusive, 2 error.
    Witness(WitnessArgs),
    /// Run a batch reproduction and write CSV, summary.json and manifest.json
    /// into --out.
    Repro(repro::ReproArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    /// Thermal amplitude damping with strengths --p1, --p2 and --beta.
    ThermalAd,
    /// Dephasing channels of strength --p1 then --p2.
    Dephase,
    /// Toy dephasing dilation of strength --p, rewound in the second step.
    DephaseToy,
    /// Amplitude damping channels of strength --p1 then --p2.
    Damp,
    /// Toy damping dilation of strength --p, rewound in the second step.
    DampToy,
}

#[derive(clap::Args, Debug)]
struct WitnessArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Margin a certificate has to clear.
    #[arg(long, default_value_t = DEFAULT_DECISION_TOL)]
    tol: f64,
}

fn need(v: Option<f64>, name: &'static str) -> CliResult<f64> {
    v.ok_or(CliError::MissingFlag(name))
}

fn witness_pair(a: &WitnessArgs) -> CliResult<(QuantumChannel, QuantumChannel, BTreeMap<String, f64>)> {
    let mut params = BTreeMap::new();
    let pair = match a.family {
        Family::ThermalAd => {
            let (p1, p2, beta) = (need(a.p1, "p1")?, need(a.p2, "p2")?, need(a.beta, "beta")?);
            params.extend([("p1".to_string(), p1), ("p2".to_string(), p2), ("beta".to_string(), beta)]);
            (
                families::thermal_ad_channel(ThermalAdParams::new(p1, beta)?)?,
                families::thermal_ad_channel(ThermalAdParams::new(p2, beta)?)?,
            )
        }
        Family::Dephase | Family::Damp => {
            let (p1, p2) = (need(a.p1, "p1")?, need(a.p2, "p2")?);
            params.extend([("p1".to_string(), p1), ("p2".to_string(), p2)]);
            let make = if a.family == Family::Dephase { families::dephasing_channel::<f64> } else { families::damping_channel::<f64> };
            (make(p1)?, make(p2)?)
        }
        Family::DephaseToy | Family::DampToy => {
            let p = need(a.p, "p")?;
            params.insert("p".to_string(), p);
            let kind = if a.family == Family::DephaseToy { ToyKind::Dephase } else { ToyKind::Damp };
            let d = families::toy_dilation_dynamics(ToyModelParams::new(kind, p)?)?;
            (d.maps()[0].clone(), d.maps()[1].clone())
        }
    };
    Ok((pair.0, pair.1, params))
}

fn cmd_witness(a: &WitnessArgs) -> CliResult<bool> {
    let (e1, e2, params) = witness_pair(a)?;
    let report = evaluate_witness(&e1, &e2, a.tol)?;
    println!("{}", serde_json::to_string_pretty(&WitnessJson::new(&report, None, params))?);
    Ok(report.certified())
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("MEMWIT_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Threads(format!("MEMWIT_THREADS = {v:?} is not a positive integer")))?;
        if n == 0 {
            return Err(CliError::Threads("MEMWIT_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> CliResult<ExitCode> {
        init_threads()?;
        match &cli.command {
            Command::Witness(a) => Ok(if cmd_witness(a)? { ExitCode::SUCCESS } else { ExitCode::from(1) }),
            Command::Repro(a) => {
                repro::run(a)?;
                Ok(ExitCode::SUCCESS)
            }
        }
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
