//! `graspforge`: the command-line surface over the core library.
//!
//! Subcommands mirror the library modules: `robot` (descriptions, link
//! point sets), `mesh` (sampling, SDF, ICP, D2), `retarget`, `metrics`,
//! `dro` (encode/decode), `eval`, `pipeline` (filter/augment), and
//! `export`. Conventions shared by all of them: `--seed` for a command's
//! own randomness, `--config` for a JSON config file, `--out` for the
//! output path. Exit codes: 0 success, 1 user error (bad input or files),
//! 2 internal invariant violation.

mod cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graspforge_core::ErrorKind;

#[derive(Parser)]
#[command(
    name = "graspforge",
    version,
    about = "Robot grasp dataset toolkit: retargeting, the distance-matrix grasp codec, \
             quality metrics, force-closure evaluation, filtering and augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect robot descriptions and sample link point sets.
    #[command(subcommand)]
    Robot(cmd::robot::Robot),
    /// Mesh and point-cloud utilities: sample, sdf, icp, d2.
    #[command(subcommand)]
    Mesh(cmd::mesh::Mesh),
    /// Fit a robot configuration to human hand keypoints.
    Retarget(cmd::retarget::Retarget),
    /// Grasp quality metrics for one or more grasp records.
    Metrics(cmd::metrics::Metrics),
    /// Encode grasps into distance matrices and decode them back.
    #[command(subcommand)]
    Dro(cmd::dro::Dro),
    /// Force-closure evaluation over a record file.
    Eval(cmd::eval::Eval),
    /// Dataset filtering and simulation-backed augmentation.
    #[command(subcommand)]
    Pipeline(cmd::pipeline::Pipeline),
    /// Export posed-hand OBJ meshes for inspection.
    Export(cmd::export::Export),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are user errors (exit 1); --help and
            // --version print to stdout and exit 0.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Robot(c) => cmd::robot::run(c),
        Command::Mesh(c) => cmd::mesh::run(c),
        Command::Retarget(c) => cmd::retarget::run(c),
        Command::Metrics(c) => cmd::metrics::run(c),
        Command::Dro(c) => cmd::dro::run(c),
        Command::Eval(c) => cmd::eval::run(c),
        Command::Pipeline(c) => cmd::pipeline::run(c),
        Command::Export(c) => cmd::export::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::User => ExitCode::from(1),
                ErrorKind::Internal => ExitCode::from(2),
            }
        }
    }
}
