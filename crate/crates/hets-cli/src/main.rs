//! hets: key generation, encrypted inference (local or remote), the
//! inference service and the benchmark suites.

mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hets",
    version,
    about = "Leveled homomorphic encryption with an encrypted tensor layer"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for parallel evaluation (default: HETS_WORKERS or
    /// all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for deterministic key generation and encryption randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a keyed context and write private/public context files.
    Keygen {
        /// Parameter profile: mnist-8192 or test-4096.
        #[arg(long, default_value = "mnist-8192")]
        profile: String,
        /// Output directory for private.ctx and public.ctx.
        #[arg(long)]
        out_dir: PathBuf,
        /// Model file supplying workload rotation steps (defaults to the
        /// fixture architecture for the mnist profile).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run encrypted inference on one image, printing the stage timing
    /// table, logits and the predicted class.
    Infer {
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Image file (JSON tensor).
        #[arg(long)]
        image: PathBuf,
        /// Context file from keygen; mutually exclusive with --profile.
        #[arg(long)]
        context: Option<PathBuf>,
        /// Generate a fresh context from this profile instead.
        #[arg(long)]
        profile: Option<String>,
        /// Route the request through a remote service.
        #[arg(long)]
        connect: Option<String>,
        /// Evaluation backend: real or mock.
        #[arg(long, default_value = "real")]
        backend: String,
    },
    /// Serve encrypted inference over TCP.
    Serve {
        /// Listen address, host:port.
        #[arg(long)]
        listen: String,
        /// Context file (reduced to its public form).
        #[arg(long)]
        context: PathBuf,
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
    },
    /// Run a benchmark suite and print the report table.
    Bench {
        /// Suite: unary, binary or mnist.
        #[arg(long)]
        suite: String,
        /// Parameter profile.
        #[arg(long, default_value = "mnist-8192")]
        profile: String,
        /// Comma-separated tensor shapes (defaults to the published
        /// shapes that fit the profile).
        #[arg(long)]
        shapes: Option<String>,
        /// Evaluation backend: real or mock.
        #[arg(long, default_value = "real")]
        backend: String,
        /// Write the report as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Timing rounds per op (each round times `iterations` runs).
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        /// Iterations per round.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Write the fixture model, images and manifest.
    Fixtures {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("HETS_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let result = match cli.cmd {
        Cmd::Keygen {
            profile,
            out_dir,
            model,
        } => commands::keygen(&profile, &out_dir, model.as_deref(), workers, cli.seed),
        Cmd::Infer {
            model,
            image,
            context,
            profile,
            connect,
            backend,
        } => commands::infer(
            &model,
            &image,
            context.as_deref(),
            profile.as_deref(),
            connect.as_deref(),
            &backend,
            workers,
            cli.seed,
        ),
        Cmd::Serve {
            listen,
            context,
            model,
        } => commands::serve(&listen, &context, &model, workers),
        Cmd::Bench {
            suite,
            profile,
            shapes,
            backend,
            out,
            rounds,
            iterations,
        } => bench::run(
            &suite,
            &profile,
            shapes.as_deref(),
            &backend,
            out.as_deref(),
            rounds,
            iterations,
            workers,
            cli.seed,
        ),
        Cmd::Fixtures { out_dir } => {
            hets_core::nn::fixtures::write_fixtures(&out_dir).map(|()| {
                println!("fixtures written to {}", out_dir.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.code());
            ExitCode::FAILURE
        }
    }
}
