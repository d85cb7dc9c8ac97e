//! `spectrafree`: spectral kernels, filter comparisons, reconstruction and
//! smoothing experiments, and spectrum diagnostics on graphs and meshes.
//!
//! Each command writes CSV files and a `report.json` into `--out`. Exit
//! status is 0 on success, 2 for bad input and 3 when the numerics fail.

mod commands;
mod input;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;

#[derive(Debug, Parser)]
#[command(name = "spectrafree", version, about = "Spectrum-free spectral filtering on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel columns φ(L)δ_p at chosen or sampled nodes.
    Kernel(KernelArgs),
    /// Errors of spectrum-free methods against the dense oracle.
    Compare(CompareArgs),
    /// Least-squares reconstruction error of a signal against basis size.
    Reconstruct(ReconstructArgs),
    /// Noisy-signal smoothing by projection on a diffusion basis.
    Smooth(SmoothArgs),
    /// Chebyshev moments and smoothed spectral density.
    Density(DensityArgs),
    /// Pseudo-spectrum membership along a line scan.
    Pseudospec(PseudospecArgs),
    /// Characteristic polynomial from eigenvalues with multiplicities.
    Charpoly(CharpolyArgs),
    /// Spectral distances between node pairs.
    Distance(DistanceArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical =
        err.chain().find_map(|e| e.downcast_ref::<spectrafree_core::Error>()).is_some_and(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Kernel(a) => (kernel(a), &a.run.out),
        Command::Compare(a) => (compare(a), &a.run.out),
        Command::Reconstruct(a) => (reconstruct(a), &a.run.out),
        Command::Smooth(a) => (smooth(a), &a.run.out),
        Command::Density(a) => (density(a), &a.run.out),
        Command::Pseudospec(a) => (pseudospec(a), &a.source.run.out),
        Command::Charpoly(a) => (charpoly(a), &a.source.run.out),
        Command::Distance(a) => (distance(a), &a.run.out),
    };
    match result.and_then(|r| Ok((r.write(out)?, r))) {
        Ok((path, report)) => {
            for (k, v) in &report.metrics {
                println!("{k} = {v:e}");
            }
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
