use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use vrae_core::data::{prune_pitches, read_midi, to_piano_roll, PianoRoll};

use crate::util::{ensure_dir, print_config, show_opt, show_paths};

/// Frame rate of the ingestion pipeline.
const RATE_HZ: f64 = 20.0;

/// Convert MIDI files into pruned roll files plus a pitch report.
#[derive(Args, Debug)]
pub struct RollArgs {
    /// Input Standard MIDI Files (formats 0 and 1).
    #[arg(long, required = true, num_args = 1..)]
    pub midi: Vec<PathBuf>,
    /// Output directory for the .roll files.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep a pitch only if it is active in at least this many frames
    /// across all inputs. Defaults to 1% of the total frame count.
    #[arg(long)]
    pub min_active: Option<usize>,
}

pub fn run(args: &RollArgs) -> Result<()> {
    let mut named: Vec<(PianoRoll, String)> = Vec::new();
    let mut total_frames = 0usize;
    for path in &args.midi {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = read_midi(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        for warning in &parsed.warnings {
            eprintln!("warning: {}: {warning}", path.display());
        }
        let roll = to_piano_roll(&parsed.events, RATE_HZ)?;
        total_frames += roll.frames();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        named.push((roll, stem));
    }

    let min_active = args.min_active.unwrap_or_else(|| (total_frames / 100).max(1));
    print_config(
        "roll",
        &[
            ("midi", show_paths(&args.midi)),
            ("out", args.out.display().to_string()),
            ("min-active", show_opt(&args.min_active)),
            ("min-active (resolved)", min_active.to_string()),
            ("rate", format!("{RATE_HZ}")),
        ],
    );

    let rolls: Vec<PianoRoll> = named.iter().map(|(r, _)| r.clone()).collect();
    let (pruned, kept) = prune_pitches(&rolls, min_active)?;

    ensure_dir(&args.out)?;
    for (roll, (_, stem)) in pruned.iter().zip(&named) {
        let path = args.out.join(format!("{stem}.roll"));
        let mut file = std::fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        roll.write_text(&mut file)?;
        println!(
            "wrote {} ({} frames x {} pitches)",
            path.display(),
            roll.frames(),
            roll.dims()
        );
    }

    let pitches: Vec<String> = kept.iter().map(|p| p.to_string()).collect();
    println!(
        "kept {} of 128 pitch dimensions: {}",
        kept.len(),
        pitches.join(",")
    );
    Ok(())
}
