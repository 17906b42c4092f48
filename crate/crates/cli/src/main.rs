use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rrmimo::cli::{self, Command, Overrides};

#[derive(Parser, Debug)]
#[command(name = "rrmimo", version, about = "Reduced-rank channel estimation for beamspace massive MIMO")]
struct Args {
    #[command(subcommand)]
    command: Option<Cmd>,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo trials per sweep point (0 disables).
    #[arg(long, global = true)]
    mc_trials: Option<usize>,
    /// Sweep axis: dimension, snr_db, inr_db or separation_deg.
    #[arg(long, global = true)]
    axis: Option<String>,
    /// Grid as `a,b,c` or `start:stop[:step]`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Beam design(s), comma separated: geb, dft.
    #[arg(long, global = true)]
    beam: Option<String>,
    /// Estimator(s), comma separated.
    #[arg(long, global = true)]
    estimator: Option<String>,
    /// Beamspace dimension for design, estimate and non-dimension sweeps.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Write the beam pattern over -90..90 degrees (design).
    #[arg(long, global = true)]
    export_pattern: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Design a beamspace and report its criteria.
    Design,
    /// Estimate one synthetic channel realization.
    Estimate,
    /// Run a parameter sweep.
    Sweep,
    /// Check the closed-form criteria against direct evaluation.
    Identities,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let overrides = Overrides {
        command: args.command.map(|c| match c {
            Cmd::Design => Command::Design,
            Cmd::Estimate => Command::Estimate,
            Cmd::Sweep => Command::Sweep,
            Cmd::Identities => Command::Identities,
        }),
        out: args.out,
        seed: args.seed,
        threads: args.threads,
        mc_trials: args.mc_trials,
        axis: args.axis,
        grid: args.grid,
        beam: args.beam,
        estimator: args.estimator,
        dim: args.dim,
        export_pattern: args.export_pattern,
    };
    let result = cli::load(args.config.as_deref(), &overrides).and_then(|cfg| cli::run(&cfg));
    match result {
        Ok(out) => {
            for f in out.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
