use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clebsch_geodesic_cli::commands::{
    error_report, run_bvp, run_integrate, run_sample, run_verify, RunOptions,
};
use clebsch_geodesic_cli::config::LoadedConfig;
use clebsch_geodesic_cli::error::CliError;
use clebsch_geodesic_cli::output::write_json;

/// Geodesics on ellipsoids: integration, structure verification and
/// two-point shooting.
#[derive(Debug, Parser)]
#[command(name = "geodesic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the direct flow, the Clebsch flow, or both.
    Integrate(Common),
    /// Check the conservation identities and the Poisson structure.
    Verify(Common),
    /// Solve for the geodesic joining two points.
    Bvp(Common),
    /// Draw random tangent states.
    Sample(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Random seed; overrides `seed` in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Also write a matplotlib script for the CSV outputs.
    #[arg(long)]
    emit_plot_script: bool,
}

fn run(cmd: &Command) -> Result<bool, (CliError, Option<PathBuf>)> {
    let (Command::Integrate(c) | Command::Verify(c) | Command::Bvp(c) | Command::Sample(c)) = cmd;
    let lc = LoadedConfig::read(&c.config).map_err(|e| (e.into(), None))?;
    let opts = RunOptions::resolve(&lc, c.out.clone(), c.seed, c.emit_plot_script);
    let dir = Some(opts.out_dir.clone());
    match cmd {
        Command::Integrate(_) => run_integrate(&lc, &opts).map(|_| true),
        Command::Bvp(_) => run_bvp(&lc, &opts).map(|_| true),
        Command::Sample(_) => run_sample(&lc, &opts).map(|_| true),
        Command::Verify(_) => run_verify(&lc, &opts).map(|(report, _)| {
            for c in report.checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "check {} failed: {:e} >= {:e}",
                    c.name, c.max_residual, c.bound
                );
            }
            report.pass
        }),
    }
    .map_err(|e| (e, dir))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEO_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err((err, dir)) => {
            eprintln!("{err}");
            if let (Some(dir), CliError::Geo(_)) = (dir, &err) {
                let _ = write_json(&dir, "error.json", &error_report(&err));
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
