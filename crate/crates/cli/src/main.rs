mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Floating-base centroidal dynamics and centroidal-frame integrability checks.
#[derive(Parser, Debug)]
#[command(name = "centroidal-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the curvature of the mechanical connection over a shape grid.
    CheckFlatness(FlatnessArgs),
    /// Carry the centroidal frame around a closed shape loop.
    Holonomy(HolonomyArgs),
    /// Simulate the unactuated dynamics and record momentum.
    Simulate(SimulateArgs),
    /// Momentum and locked/average velocities at a state, or along a
    /// prescribed shape trajectory with a free-floating base.
    Momentum(MomentumArgs),
    /// Describe a model.
    Info(ModelArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (TOML) or builtin `three-link:d=<value>`.
    #[arg(long)]
    pub model: String,
    /// Gravity override `x,y,z` in m/s².
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub gravity: Option<[f64; 3]>,
}

#[derive(Args, Debug)]
pub struct FlatnessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Flatness tolerance on max ‖B_ij‖.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Points per axis, one value for all axes or a comma list.
    #[arg(long, default_value = "20")]
    pub grid: String,
    /// Directory for `flatness.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HolonomyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Shape loop: a CSV file or `sinusoid:T=<seconds>`.
    #[arg(long, default_value = "sinusoid:T=10")]
    pub trajectory: String,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Number of SVG snapshots evenly spaced over the loop.
    #[arg(long, default_value_t = 0)]
    pub snapshots: usize,
    /// Directory for `centroidal.csv` and snapshots.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InitialState {
    /// Initial joint positions, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub s0: Option<List>,
    /// Initial base body velocity `vx,vy,vz,wx,wy,wz`.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub v0: Option<List>,
    /// Initial joint velocities, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub sdot0: Option<List>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub initial: InitialState,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Fail with exit code 2 if momentum departs from its balance law by
    /// more than 1e-6 relative.
    #[arg(long)]
    pub check_conservation: bool,
    /// Directory for `trajectory.csv`, `momentum.csv` and `centroidal.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MomentumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub initial: InitialState,
    /// Prescribed shape trajectory; without it only the initial state is evaluated.
    #[arg(long)]
    pub trajectory: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Directory for `momentum.csv` and `centroidal.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Comma-separated numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct List(pub Vec<f64>);

fn parse_list(text: &str) -> Result<List, String> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_vec3(text: &str) -> Result<[f64; 3], String> {
    let v = parse_list(text)?.0;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 values, got {}", v.len()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let threads = std::env::var("CENTROIDAL_KIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    let result = centroidal_core::exec::with_threads(threads, || match cli.command {
        Command::CheckFlatness(a) => commands::check_flatness(&a),
        Command::Holonomy(a) => commands::holonomy(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Momentum(a) => commands::momentum(&a),
        Command::Info(a) => commands::info(&a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let blown_up = err.chain().any(|e| {
                matches!(
                    e.downcast_ref::<centroidal_core::Error>(),
                    Some(centroidal_core::Error::NonFinite { .. })
                )
            });
            ExitCode::from(if blown_up { 3 } else { 1 })
        }
    }
}
