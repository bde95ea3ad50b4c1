use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use vrae_core::data::{write_midi, PianoRoll};
use vrae_core::latentops::{generate, sample_prior};
use vrae_core::trainer::load_checkpoint;

use crate::util::{parse_policy, print_config};

/// Sample the latent prior and free-run the decoder into a roll or MIDI file.
#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output path; a .mid extension writes a format-0 MIDI file, anything
    /// else the roll text format.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the prior draw of the latent vector.
    #[arg(long, default_value_t = 0)]
    pub prior_seed: u64,
    /// Frames to generate.
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    /// Feedback policy: sample, threshold, or expectation.
    #[arg(long, default_value = "sample")]
    pub policy: String,
    /// Binarization threshold for the threshold policy.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Seed for Bernoulli feedback sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let policy = parse_policy(&args.policy, args.threshold, args.seed)?;

    print_config(
        "generate",
        &[
            ("checkpoint", args.checkpoint.display().to_string()),
            ("out", args.out.display().to_string()),
            ("prior-seed", args.prior_seed.to_string()),
            ("length", args.length.to_string()),
            ("policy", args.policy.clone()),
            ("threshold", args.threshold.to_string()),
            ("seed", args.seed.to_string()),
            ("latent (from checkpoint)", ckpt.config.model.latent_dim.to_string()),
        ],
    );

    let z = sample_prior(ckpt.config.model.latent_dim, args.prior_seed);
    let roll = generate(
        &ckpt.params,
        &z,
        args.length,
        policy,
        &ckpt.config.model,
        20.0,
        &ckpt.pitch_map,
    )?;
    write_output(&roll, &args.out)?;
    println!(
        "wrote {} frames x {} pitches to {}",
        roll.frames(),
        roll.dims(),
        args.out.display()
    );
    Ok(())
}

pub fn write_output(roll: &PianoRoll, path: &PathBuf) -> Result<()> {
    if path.extension().is_some_and(|e| e == "mid" || e == "midi") {
        let bytes = write_midi(roll)?;
        std::fs::write(path, bytes)
            .with_context(|| format!("writing {}", path.display()))?;
    } else {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        roll.write_text(&mut file)?;
    }
    Ok(())
}
