//! Command-line front end: MIDI conversion, training, encoding, generation,
//! interpolation, and gradient checking.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

mod commands;
mod presets;
mod util;

use clap::{Parser, Subcommand};

use commands::{encode, generate, gradcheck, interpolate, roll, train};

#[derive(Parser, Debug)]
#[command(
    name = "vrae",
    version,
    about = "Variational recurrent auto-encoder for MIDI piano rolls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert MIDI files to pruned piano-roll files.
    Roll(roll::RollArgs),
    /// Train a model on roll files.
    Train(train::TrainArgs),
    /// Encode roll windows to latent CSV.
    Encode(encode::EncodeArgs),
    /// Generate a sequence from a prior sample.
    Generate(generate::GenerateArgs),
    /// Interpolate between two encoded sequences.
    Interpolate(interpolate::InterpolateArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Roll(args) => roll::run(args),
        Command::Train(args) => train::run(args),
        Command::Encode(args) => encode::run(args),
        Command::Generate(args) => generate::run(args),
        Command::Interpolate(args) => interpolate::run(args),
        Command::Gradcheck(args) => gradcheck::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
