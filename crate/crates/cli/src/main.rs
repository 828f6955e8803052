use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sclab_harness::experiments::Command;
use sclab_harness::{execute, Overrides};

#[derive(Parser)]
#[command(name = "sclab", version, about = "Self-consistent transfer operator experiments on the 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config; omitted fields take their defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol_fix: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Iterate the self-consistent operator to its fixed point.
    FixedPoint,
    /// Solve from several initial densities and compare the limits.
    Uniqueness,
    /// Fixed points along an ε grid and adjacent Lipschitz ratios.
    Sweep,
    /// Two densities pushed through shared random driving sequences.
    MemoryLoss,
    /// Particle ensembles against the density evolution.
    ParticlesGap,
    /// Cone invariance along random coupled concatenations.
    Cones,
    /// Sampled coupling regularity constants.
    CertifyCoupling,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::FixedPoint => Command::FixedPoint,
            Sub::Uniqueness => Command::Uniqueness,
            Sub::Sweep => Command::Sweep,
            Sub::MemoryLoss => Command::MemoryLoss,
            Sub::ParticlesGap => Command::ParticlesGap,
            Sub::Cones => Command::Cones,
            Sub::CertifyCoupling => Command::CertifyCoupling,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    if let Some(t) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("sclab: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides {
        output_dir: c.output_dir,
        resolution: c.resolution,
        eps: c.eps,
        delta: c.delta,
        seed: c.seed,
        tol_fix: c.tol_fix,
        max_iterations: c.max_iterations,
    };
    let outcome = execute(cli.command.into(), c.config.as_deref(), &overrides);
    if let Err(e) = &outcome.result {
        eprintln!("sclab: {e}");
    }
    ExitCode::from(outcome.manifest.exit_code as u8)
}
