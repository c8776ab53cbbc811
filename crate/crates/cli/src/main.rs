mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlsgraph::Graph;

#[derive(Debug, Parser)]
#[command(name = "nlsgraph", version, about = "Ground states and stability of NLS on the T-graph and tadpole graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphArg {
    /// Two half-lines and a pendant edge
    T,
    /// One half-line and a loop
    Tadpole,
}

impl GraphArg {
    pub fn graph(self) -> Graph {
        match self {
            GraphArg::T => Graph::TGraph,
            GraphArg::Tadpole => Graph::Tadpole,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    LambdaSmall,
    LambdaLarge,
    P2,
    Pinf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground state and verdict at one (p, lambda)
    State(StateArgs),
    /// Scan lambda for a change of stability
    Transitions(TransitionArgs),
    /// Sweep a (p, lambda) grid and write CSV and optionally a PPM raster
    Diagram(DiagramArgs),
    /// Ratio tests against the limit formulas, as JSON
    Asymptotics(AsymptoticArgs),
    /// Sample the ground state on every edge
    Profile(ProfileArgs),
    /// Compare closed forms with ODE shooting over a z range
    Oracle(OracleArgs),
    /// Run the built-in property checks
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TransitionArgs {
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lmin: f64,
    #[arg(long, default_value_t = 1e4)]
    pub lmax: f64,
    #[arg(long, default_value_t = 128)]
    pub scan: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DiagramArgs {
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    #[arg(long, default_value_t = 2.2)]
    pub pmin: f64,
    #[arg(long, default_value_t = 10.0)]
    pub pmax: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub lmin: f64,
    #[arg(long, default_value_t = 1e2)]
    pub lmax: f64,
    /// Points along lambda (log-spaced)
    #[arg(long, default_value_t = 200)]
    pub nx: usize,
    /// Points along p (linear)
    #[arg(long, default_value_t = 200)]
    pub ny: usize,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub ppm: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    /// Exponent for the lambda regimes
    #[arg(long)]
    pub p: Option<f64>,
    /// Frequency window for the p regimes
    #[arg(long, default_value_t = 0.5)]
    pub lmin: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lmax: f64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub csv: PathBuf,
    /// Samples per edge
    #[arg(long, default_value_t = 201)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub graph: GraphArg,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub zmin: f64,
    #[arg(long)]
    pub zmax: f64,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = nlsgraph::oracle::DEFAULT_STEP_TOL)]
    pub step_tol: f64,
    /// Write the table here instead of standard output
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(cli.command, &argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(commands::Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
