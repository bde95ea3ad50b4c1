use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use vrae_core::data::build_dataset;
use vrae_core::model::ModelConfig;
use vrae_core::optimizer::AdamConfig;
use vrae_core::trainer::{load_checkpoint, train, Checkpoint, TrainConfig, TrainIo};

use crate::presets::Preset;
use crate::util::{
    describe_schedule, load_rolls, parse_schedule, print_config, show_opt, show_paths,
};

/// Train a model on roll files, writing checkpoints and a metrics CSV.
#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Input .roll files (pruned together, identical pitch maps).
    #[arg(long, required = true, num_args = 1..)]
    pub rolls: Vec<PathBuf>,
    /// Metrics CSV path.
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
    /// Checkpoint path, written at the end of training.
    #[arg(long, default_value = "model.ckpt")]
    pub checkpoint: PathBuf,
    /// Resume from an existing checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Apply a named preset (paper-2d, paper-20d); explicit flags win.
    #[arg(long)]
    pub preset: Option<String>,
    /// Frames per training sequence.
    #[arg(long)]
    pub window: Option<usize>,
    /// Window start spacing; equal to the window by default.
    #[arg(long)]
    pub stride: Option<usize>,
    /// At most this many windows per roll.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Feed the encoder each window's frames in reverse order.
    #[arg(long)]
    pub reverse_input: bool,
    /// Hidden state size.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Latent dimension.
    #[arg(long)]
    pub latent: Option<usize>,
    /// Total epochs to reach.
    #[arg(long)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Comma list of epoch:rate points, optionally prefixed `geometric:`.
    #[arg(long)]
    pub lr_schedule: Option<String>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    /// `modern` reads the betas as decay rates (0.95 keeps 95% per step);
    /// `paper` reads them as decay complements (0.05 means the same thing).
    #[arg(long, default_value = "modern")]
    pub adam_beta_convention: String,
    #[arg(long)]
    pub kl_scale: Option<f64>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Global-norm gradient clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Seeds parameter init, posterior noise, and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads per batch; does not change results.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Additionally write the checkpoint every this many epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

fn resolve_adam(args: &TrainArgs) -> Result<AdamConfig> {
    let (decay1, decay2) = match args.adam_beta_convention.as_str() {
        "modern" => (
            args.adam_beta1.unwrap_or(0.95),
            args.adam_beta2.unwrap_or(0.999),
        ),
        "paper" => (
            1.0 - args.adam_beta1.unwrap_or(0.05),
            1.0 - args.adam_beta2.unwrap_or(0.001),
        ),
        other => bail!("unknown beta convention {other:?}; use modern or paper"),
    };
    Ok(AdamConfig {
        decay1,
        decay2,
        epsilon: 1e-8,
    })
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let preset = args.preset.as_deref().map(Preset::parse).transpose()?;
    let resumed: Option<Checkpoint> = args
        .resume
        .as_ref()
        .map(|p| load_checkpoint(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;

    // Model geometry: checkpoint > explicit flag > preset > default, with
    // explicit flags rejected when they contradict a resumed checkpoint.
    let hidden = resolve_model_dim(
        "hidden",
        args.hidden,
        preset.map(|p| p.hidden()),
        500,
        resumed.as_ref().map(|c| c.config.model.hidden_dim),
    )?;
    let latent = resolve_model_dim(
        "latent",
        args.latent,
        preset.map(|p| p.latent()),
        2,
        resumed.as_ref().map(|c| c.config.model.latent_dim),
    )?;
    let window = resolve_model_dim(
        "window",
        args.window,
        preset.map(|p| p.window()),
        50,
        resumed.as_ref().map(|c| c.config.model.seq_len),
    )?;
    let mc_samples = resolve_model_dim(
        "mc-samples",
        args.mc_samples,
        None,
        1,
        resumed.as_ref().map(|c| c.config.model.mc_samples),
    )?;
    let kl_scale = match (&resumed, args.kl_scale) {
        (Some(c), Some(flag)) if flag != c.config.model.kl_scale => {
            bail!(
                "--kl-scale {flag} conflicts with the checkpoint's {}",
                c.config.model.kl_scale
            )
        }
        (Some(c), _) => c.config.model.kl_scale,
        (None, flag) => flag.unwrap_or(0.5),
    };
    let reverse_input = match &resumed {
        Some(c) => {
            if args.reverse_input && !c.config.reverse_input {
                bail!("--reverse-input conflicts with the checkpoint, which trained forward");
            }
            c.config.reverse_input
        }
        None => args.reverse_input,
    };

    let stride = args
        .stride
        .or(preset.map(|p| p.stride()))
        .unwrap_or(window);
    let schedule = match (&args.lr_schedule, preset) {
        (Some(spec), _) => parse_schedule(spec)?,
        (None, Some(p)) => p.schedule(args.epochs)?,
        (None, None) => parse_schedule("0:0.001")?,
    };
    let adam = resolve_adam(args)?;

    print_config(
        "train",
        &[
            ("rolls", show_paths(&args.rolls)),
            ("out", args.out.display().to_string()),
            ("checkpoint", args.checkpoint.display().to_string()),
            (
                "resume",
                show_opt(&args.resume.as_ref().map(|p| p.display().to_string())),
            ),
            ("preset", show_opt(&preset.map(|p| p.name()))),
            ("window", window.to_string()),
            ("stride", stride.to_string()),
            ("limit", show_opt(&args.limit)),
            ("reverse-input", reverse_input.to_string()),
            ("hidden", hidden.to_string()),
            ("latent", latent.to_string()),
            ("epochs", args.epochs.to_string()),
            ("batch-size", args.batch_size.to_string()),
            ("lr-schedule", describe_schedule(&schedule)),
            ("adam-decay1", adam.decay1.to_string()),
            ("adam-decay2", adam.decay2.to_string()),
            ("adam-epsilon", adam.epsilon.to_string()),
            ("kl-scale", kl_scale.to_string()),
            ("mc-samples", mc_samples.to_string()),
            ("clip-norm", show_opt(&args.clip_norm)),
            ("seed", args.seed.to_string()),
            ("threads", args.threads.to_string()),
            ("checkpoint-every", show_opt(&args.checkpoint_every)),
        ],
    );

    let rolls = load_rolls(&args.rolls)?;
    let dataset = build_dataset(&rolls, window, stride, args.limit, reverse_input)?;
    println!(
        "dataset: {} sequences of {} frames x {} pitches",
        dataset.len(),
        dataset.window_len(),
        dataset.dims()
    );

    let model = ModelConfig {
        data_dim: dataset.dims(),
        hidden_dim: hidden,
        latent_dim: latent,
        seq_len: window,
        mc_samples,
        kl_scale,
    };
    let mut cfg = TrainConfig::new(model, args.epochs, schedule);
    cfg.batch_size = args.batch_size;
    // model_seed + 1 already seeds the posterior noise stream inside the
    // trainer; keep the shuffle stream distinct from both.
    cfg.shuffle_seed = args.seed.wrapping_add(2);
    cfg.model_seed = args.seed;
    cfg.adam = adam;
    cfg.clip_norm = args.clip_norm;
    cfg.reverse_input = reverse_input;
    cfg.threads = args.threads.max(1);

    let io = TrainIo {
        metrics_path: Some(args.out.clone()),
        checkpoint_path: Some(args.checkpoint.clone()),
        checkpoint_every: args.checkpoint_every,
    };
    let (ckpt, logged) = train(&dataset, &cfg, &io, resumed)?;
    if let Some(last) = logged.last() {
        println!(
            "epoch {}: lower bound per timestep {:.6} nats",
            last.epoch, last.lb_per_ts
        );
    }
    println!(
        "saved checkpoint at epoch {} to {}",
        ckpt.epoch,
        args.checkpoint.display()
    );
    Ok(())
}

fn resolve_model_dim(
    name: &str,
    flag: Option<usize>,
    preset: Option<usize>,
    default: usize,
    checkpoint: Option<usize>,
) -> Result<usize> {
    match checkpoint {
        Some(from_ckpt) => {
            if let Some(explicit) = flag {
                if explicit != from_ckpt {
                    bail!("--{name} {explicit} conflicts with the checkpoint's {from_ckpt}");
                }
            }
            Ok(from_ckpt)
        }
        None => Ok(flag.or(preset).unwrap_or(default)),
    }
}
