//! `levytail` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the input is rejected, 3 when a
//! numerical routine fails to converge, 1 on output errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "levytail", version, about = "Tail analysis of stopped Markov-modulated Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decay rates, pole residues and tail bounds of a model spec.
    Analyze(AnalyzeArgs),
    /// Monte Carlo samples of the stopped process.
    Simulate(SimulateArgs),
    /// Analytic results against a Monte Carlo run.
    Verify(VerifyArgs),
    /// Solve a wealth model, at a given rate or in equilibrium.
    Wealth(WealthArgs),
    /// Evaluate ζ(A(s)) or the excess supply g(r) on a grid.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Sample file (`.csv`) or summary report (`.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Censoring horizon; defaults to 50 / min φ.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub antithetic: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Quantile window of the tail fit, e.g. `0.95,0.9995`.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
pub struct WealthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solve at this interest rate instead of searching for equilibrium.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Also simulate wealth at the solution and fit the upper tail.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    S,
    R,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub var: SweepVar,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = text.split_once(',').ok_or("expected QLO,QHI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("QLO: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("QHI: {e}"))?;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(format!("window ({lo}, {hi}) must satisfy 0 <= QLO < QHI <= 1"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Wealth(a) => commands::wealth(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
