use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use vrae_core::data::build_dataset;
use vrae_core::latentops::encode_dataset;
use vrae_core::trainer::load_checkpoint;

use crate::util::{load_rolls, print_config, show_opt, show_paths};

/// Encode roll windows to latent coordinates and write them as CSV.
#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input .roll files with the checkpoint's pitch map.
    #[arg(long, required = true, num_args = 1..)]
    pub rolls: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long, default_value = "latents.csv")]
    pub out: PathBuf,
    /// Window start spacing; the checkpoint's window length by default.
    #[arg(long)]
    pub stride: Option<usize>,
    /// At most this many windows per roll.
    #[arg(long)]
    pub limit: Option<usize>,
}

pub fn run(args: &EncodeArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let window = ckpt.config.model.seq_len;
    let stride = args.stride.unwrap_or(window);

    print_config(
        "encode",
        &[
            ("checkpoint", args.checkpoint.display().to_string()),
            ("rolls", show_paths(&args.rolls)),
            ("out", args.out.display().to_string()),
            ("window (from checkpoint)", window.to_string()),
            ("stride", stride.to_string()),
            ("limit", show_opt(&args.limit)),
            (
                "reverse-input (from checkpoint)",
                ckpt.config.reverse_input.to_string(),
            ),
        ],
    );

    let rolls = load_rolls(&args.rolls)?;
    let dataset = build_dataset(&rolls, window, stride, args.limit, ckpt.config.reverse_input)?;
    if dataset.pitch_map() != ckpt.pitch_map {
        bail!(
            "roll pitch map {:?} does not match the checkpoint's {:?}",
            dataset.pitch_map(),
            ckpt.pitch_map
        );
    }

    let table = encode_dataset(&ckpt.params, &dataset, &ckpt.config.model)?;
    let mut file = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    table.write_csv(&mut file)?;
    println!(
        "wrote {} rows of {}-dimensional latents to {}",
        table.rows.len(),
        table.latent_dim,
        args.out.display()
    );
    Ok(())
}
