use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use vrae_core::data::build_dataset;
use vrae_core::latentops::{encode_dataset, generate, interpolate};
use vrae_core::trainer::load_checkpoint;

use crate::commands::generate::write_output;
use crate::util::{ensure_dir, load_rolls, parse_policy, print_config, show_paths};

/// Walk the latent line between two encoded sequences, decoding each point.
#[derive(Args, Debug)]
pub struct InterpolateArgs {
    /// Index of the starting sequence in the windowed dataset.
    pub from: usize,
    /// Index of the ending sequence.
    pub to: usize,
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input .roll files to window and encode.
    #[arg(long, required = true, num_args = 1..)]
    pub rolls: Vec<PathBuf>,
    /// Output directory; one roll file per interpolation point.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of interpolation points, endpoints included.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Window start spacing; the checkpoint's window length by default.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Frames per generated sequence; the training window by default.
    #[arg(long)]
    pub length: Option<usize>,
    /// Feedback policy: sample, threshold, or expectation.
    #[arg(long, default_value = "sample")]
    pub policy: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Seed for Bernoulli feedback sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &InterpolateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let window = ckpt.config.model.seq_len;
    let stride = args.stride.unwrap_or(window);
    let length = args.length.unwrap_or(window);
    let policy = parse_policy(&args.policy, args.threshold, args.seed)?;

    print_config(
        "interpolate",
        &[
            ("from", args.from.to_string()),
            ("to", args.to.to_string()),
            ("checkpoint", args.checkpoint.display().to_string()),
            ("rolls", show_paths(&args.rolls)),
            ("out", args.out.display().to_string()),
            ("steps", args.steps.to_string()),
            ("window (from checkpoint)", window.to_string()),
            ("stride", stride.to_string()),
            ("length", length.to_string()),
            ("policy", args.policy.clone()),
            ("threshold", args.threshold.to_string()),
            ("seed", args.seed.to_string()),
        ],
    );

    let rolls = load_rolls(&args.rolls)?;
    let dataset = build_dataset(&rolls, window, stride, None, ckpt.config.reverse_input)?;
    if dataset.pitch_map() != ckpt.pitch_map {
        bail!("roll pitch map does not match the checkpoint's");
    }
    if args.from >= dataset.len() || args.to >= dataset.len() {
        bail!(
            "sequence indices {} and {} must be below the dataset size {}",
            args.from,
            args.to,
            dataset.len()
        );
    }

    let table = encode_dataset(&ckpt.params, &dataset, &ckpt.config.model)?;
    let z_line = interpolate(
        &table.rows[args.from].mu,
        &table.rows[args.to].mu,
        args.steps,
    )?;

    ensure_dir(&args.out)?;
    for (k, z) in z_line.iter().enumerate() {
        let roll = generate(
            &ckpt.params,
            z,
            length,
            policy,
            &ckpt.config.model,
            20.0,
            &ckpt.pitch_map,
        )?;
        let path = args.out.join(format!("step_{k:03}.roll"));
        write_output(&roll, &path)?;
        println!("wrote {}", path.display());
    }
    println!(
        "interpolated {} points between sequence {} ({}) and sequence {} ({})",
        args.steps,
        args.from,
        table.rows[args.from].label,
        args.to,
        table.rows[args.to].label
    );
    Ok(())
}
