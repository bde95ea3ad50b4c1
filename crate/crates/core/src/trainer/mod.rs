//! Epoch loop over shuffled minibatches with metric logging, checkpointing,
//! and bit-exact resumption.
//!
//! Determinism contract: given identical config, dataset, and seeds, the
//! metric history and final parameters are bit-identical. Per-sequence
//! noise is drawn from the model RNG in batch order before evaluation, and
//! gradients are reduced in batch order, so enabling worker threads does
//! not change any result.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};

use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    backward, elbo_with_eps, init_params, Gradients, LossBreakdown, ModelConfig, Params,
};
use crate::numerics::{GaussSource, Rng64};
use crate::optimizer::{adam_step, clip_global_norm, AdamConfig, AdamState, LrSchedule};

pub const METRICS_HEADER: &str = "epoch,lb_per_ts,recon_per_dp,negkl_per_dp,lr,seconds";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Total epochs to reach (an epoch is one pass over all sequences).
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    /// Seeds the parameter init; the posterior noise stream is seeded with
    /// `model_seed + 1`.
    pub model_seed: u64,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    /// Optional global-norm gradient clipping.
    pub clip_norm: Option<f64>,
    /// Emit a metric row every this many epochs (the final epoch always
    /// logs).
    pub log_every: usize,
    /// Mean (rather than sum) gradient over each batch, which keeps
    /// learning rates batch-size-robust.
    pub grad_mean: bool,
    /// Whether the dataset feeds the encoder reversed frames.
    pub reverse_input: bool,
    /// Worker threads for per-sequence evaluation; results are identical
    /// for any value.
    pub threads: usize,
    /// Record wall-clock seconds in metric rows. Turn off to make the
    /// metrics file fully reproducible across runs.
    pub wall_clock: bool,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, epochs: usize, schedule: LrSchedule) -> Self {
        TrainConfig {
            model,
            epochs,
            batch_size: 64,
            // model_seed + 1 seeds the posterior noise stream; keep the
            // shuffle stream distinct by default.
            shuffle_seed: 2,
            model_seed: 0,
            schedule,
            adam: AdamConfig::default(),
            clip_norm: None,
            log_every: 1,
            grad_mean: true,
            reverse_input: false,
            threads: 1,
            wall_clock: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.adam.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArg("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArg("batch size must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArg("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where training writes its outputs. Everything is optional so library
/// callers can train purely in memory.
#[derive(Clone, Debug, Default)]
pub struct TrainIo {
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    /// Additionally write the checkpoint every this many epochs.
    pub checkpoint_every: Option<usize>,
}

/// One logged row; `lb_per_ts` is the epoch-mean lower bound per datapoint
/// per time step, and equals `(recon_per_dp + negkl_per_dp) / T` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub lb_per_ts: f64,
    pub recon_per_dp: f64,
    pub negkl_per_dp: f64,
    pub lr: f64,
    pub seconds: f64,
}

impl MetricRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.lb_per_ts, self.recon_per_dp, self.negkl_per_dp, self.lr,
            self.seconds
        )
    }
}

/// Train to `cfg.epochs`, starting fresh or from a checkpoint. Returns the
/// final checkpoint and the metric rows logged by this call.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    io: &TrainIo,
    resume: Option<Checkpoint>,
) -> Result<(Checkpoint, Vec<MetricRow>)> {
    cfg.validate()?;
    if dataset.dims() != cfg.model.data_dim || dataset.window_len() != cfg.model.seq_len {
        return Err(Error::Shape(format!(
            "dataset windows are {}x{}, model expects {}x{}",
            dataset.window_len(),
            dataset.dims(),
            cfg.model.seq_len,
            cfg.model.data_dim
        )));
    }
    if dataset.reverse_input() != cfg.reverse_input {
        return Err(Error::InvalidArg(
            "dataset and config disagree about input reversal".into(),
        ));
    }

    let resuming = resume.is_some();
    let (mut params, mut adam, mut noise, mut shuffle, start_epoch, mut history) =
        match resume {
            Some(ckpt) => {
                if ckpt.config.model != cfg.model {
                    return Err(Error::Checkpoint(
                        "checkpoint model configuration differs from the requested one".into(),
                    ));
                }
                if ckpt.pitch_map != dataset.pitch_map() {
                    return Err(Error::Checkpoint(
                        "checkpoint pitch map does not match the dataset".into(),
                    ));
                }
                if ckpt.epoch > cfg.epochs {
                    return Err(Error::InvalidArg(format!(
                        "checkpoint is at epoch {}, beyond the requested {}",
                        ckpt.epoch, cfg.epochs
                    )));
                }
                (
                    ckpt.params,
                    ckpt.adam,
                    GaussSource::from_state(ckpt.model_rng_state),
                    Rng64::from_state(ckpt.shuffle_rng_state),
                    ckpt.epoch,
                    ckpt.history,
                )
            }
            None => (
                init_params(&cfg.model, cfg.model_seed),
                AdamState::new(&cfg.model),
                GaussSource::new(cfg.model_seed.wrapping_add(1)),
                Rng64::new(cfg.shuffle_seed),
                0,
                Vec::new(),
            ),
        };

    let mut metrics_file = match &io.metrics_path {
        Some(path) => {
            let fresh = !(resuming && path.exists());
            let file = OpenOptions::new()
                .create(true)
                .append(!fresh)
                .write(true)
                .truncate(fresh)
                .open(path)?;
            let mut w = BufWriter::new(file);
            if fresh {
                writeln!(w, "{METRICS_HEADER}")?;
            }
            Some(w)
        }
        None => None,
    };

    let make_checkpoint = |epoch: usize,
                           params: &Params,
                           adam: &AdamState,
                           noise: &GaussSource,
                           shuffle: &Rng64,
                           history: &[MetricRow]| Checkpoint {
        config: cfg.clone(),
        params: params.clone(),
        adam: adam.clone(),
        epoch,
        model_rng_state: noise.state(),
        shuffle_rng_state: shuffle.state(),
        pitch_map: dataset.pitch_map().to_vec(),
        history: history.to_vec(),
    };

    let started = Instant::now();
    let mut logged = Vec::new();
    let mut last_saved: Option<usize> = None;
    let n = dataset.len();

    for epoch in start_epoch..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        shuffle.shuffle(&mut order);

        let mut recon_sum = 0.0;
        let mut negkl_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            // Noise is drawn here, in batch order, so that threaded
            // evaluation consumes exactly the sequential stream.
            let eps: Vec<Vec<Vec<f64>>> = batch
                .iter()
                .map(|_| {
                    (0..cfg.model.mc_samples)
                        .map(|_| noise.draw_vec(cfg.model.latent_dim))
                        .collect()
                })
                .collect();

            let results = evaluate_batch(&params, dataset, batch, &eps, cfg)?;

            let mut grads = Gradients::zeros(&cfg.model);
            for (loss, g) in &results {
                if !loss.lower_bound.is_finite() {
                    let at = last_saved
                        .map(|e| format!("; last checkpoint written at epoch {e}"))
                        .unwrap_or_default();
                    return Err(Error::Train(format!(
                        "non-finite loss at epoch {}{at}",
                        epoch + 1
                    )));
                }
                recon_sum += loss.recon_ll;
                negkl_sum += loss.neg_kl;
                grads.add_assign(g);
            }
            if cfg.grad_mean {
                grads.scale(1.0 / batch.len() as f64);
            }
            if let Some(clip) = cfg.clip_norm {
                clip_global_norm(&mut grads, clip);
            }
            adam_step(&mut adam, &mut params, &grads, lr, &cfg.adam)?;
        }

        let done = epoch + 1;
        if done % cfg.log_every == 0 || done == cfg.epochs {
            let recon_per_dp = recon_sum / n as f64;
            let negkl_per_dp = negkl_sum / n as f64;
            let row = MetricRow {
                epoch: done,
                lb_per_ts: (recon_per_dp + negkl_per_dp) / cfg.model.seq_len as f64,
                recon_per_dp,
                negkl_per_dp,
                lr,
                seconds: if cfg.wall_clock {
                    started.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            };
            if let Some(w) = metrics_file.as_mut() {
                writeln!(w, "{}", row.csv_line())?;
                w.flush()?;
            }
            history.push(row);
            logged.push(row);
        }

        if let (Some(every), Some(path)) = (io.checkpoint_every, &io.checkpoint_path) {
            if done % every == 0 && done != cfg.epochs {
                let ckpt = make_checkpoint(done, &params, &adam, &noise, &shuffle, &history);
                save_checkpoint(&ckpt, path)?;
                last_saved = Some(done);
            }
        }
    }

    let final_ckpt = make_checkpoint(cfg.epochs, &params, &adam, &noise, &shuffle, &history);
    if let Some(path) = &io.checkpoint_path {
        save_checkpoint(&final_ckpt, path)?;
    }
    Ok((final_ckpt, logged))
}

fn evaluate_batch(
    params: &Params,
    dataset: &Dataset,
    batch: &[usize],
    eps: &[Vec<Vec<f64>>],
    cfg: &TrainConfig,
) -> Result<Vec<(LossBreakdown, Gradients)>> {
    let eval = |&idx: &usize, eps: &Vec<Vec<f64>>| -> Result<(LossBreakdown, Gradients)> {
        let (input, target) = dataset.views(idx);
        let (loss, trace) = elbo_with_eps(params, input, target, eps, &cfg.model)?;
        let grads = backward(params, &trace, &cfg.model)?;
        Ok((loss, grads))
    };

    if cfg.threads <= 1 || batch.len() < 2 {
        return batch.iter().zip(eps).map(|(i, e)| eval(i, e)).collect();
    }

    let chunk = batch.len().div_ceil(cfg.threads);
    let chunk_results: Vec<Result<Vec<(LossBreakdown, Gradients)>>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(chunk)
                .zip(eps.chunks(chunk))
                .map(|(ids, es)| {
                    scope.spawn(move || {
                        ids.iter().zip(es).map(|(i, e)| eval(i, e)).collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker thread panicked"))
                .collect()
        });

    let mut out = Vec::with_capacity(batch.len());
    for chunk in chunk_results {
        out.extend(chunk?);
    }
    Ok(out)
}
