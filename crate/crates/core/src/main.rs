use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use gcoupling::cli::{run, Command, Flags};

/// Generalized conjugation, duality and gap functions on sampled grids.
///
/// Commands: check-coupling, conjugate, duality, saddle, perturb,
/// gap vip|ep, stability (each takes a problem file), selfcheck.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Command and its arguments, e.g. `duality qp.spec` or `gap vip vip.spec`.
    #[arg(required = true, num_args = 1..)]
    command: Vec<String>,
    /// Override the zero tolerance used for every decision.
    #[arg(long)]
    tol: Option<f64>,
    /// Write CSV outputs to this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = Flags::default().seed)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match Command::parse(&args.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let flags = Flags { tol: args.tol, out: args.out, seed: args.seed, threads: args.threads };
    let outcome = run(&command, &flags);
    if outcome.code == 2 {
        eprint!("{}", outcome.stdout);
    } else {
        print!("{}", outcome.stdout);
    }
    ExitCode::from(outcome.code as u8)
}
