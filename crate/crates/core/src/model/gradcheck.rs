//! Central finite-difference verification of the analytic gradients. This
//! is the independent oracle for the backward pass: it only ever evaluates
//! the forward bound, never the hand-derived gradients it checks.

use crate::error::Result;
use crate::model::{backward, elbo_with_eps, init_params, ModelConfig, PARAM_GROUPS};
use crate::numerics::{GaussSource, Matrix, Rng64};

/// Default step for the central difference.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)` per parameter group.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_group: Vec<(&'static str, f64)>,
    pub max_rel_error: f64,
}

/// The reference toy shape used by the `gradcheck` command.
pub fn reference_config() -> ModelConfig {
    ModelConfig {
        data_dim: 4,
        hidden_dim: 8,
        latent_dim: 2,
        seq_len: 5,
        mc_samples: 1,
        kl_scale: 0.5,
    }
}

/// Compare the analytic gradient of the lower bound against central finite
/// differences on a freshly initialized model with random binary input and
/// fixed noise. Every entry of every parameter group is checked.
pub fn finite_difference_check(
    cfg: &ModelConfig,
    seed: u64,
    step: f64,
) -> Result<GradCheckReport> {
    let params = init_params(cfg, seed);
    let mut data_rng = Rng64::new(seed.wrapping_add(0xDA7A));
    let input = Matrix::from_fn(cfg.seq_len, cfg.data_dim, |_, _| {
        f64::from(data_rng.next_below(2) as u32)
    });
    let mut noise = GaussSource::new(seed.wrapping_add(0x0E95));
    let eps: Vec<Vec<f64>> = (0..cfg.mc_samples)
        .map(|_| noise.draw_vec(cfg.latent_dim))
        .collect();

    let (_, trace) = elbo_with_eps(&params, &input, &input, &eps, cfg)?;
    let analytic = backward(&params, &trace, cfg)?;

    let mut per_group = Vec::with_capacity(PARAM_GROUPS.len());
    let mut max_rel = 0.0f64;
    for group in 0..PARAM_GROUPS.len() {
        let len = analytic.slices()[group].1.len();
        let mut group_max = 0.0f64;
        for idx in 0..len {
            let numeric = central_difference(&params, &input, &eps, cfg, group, idx, step)?;
            let a = analytic.slices()[group].1[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            group_max = group_max.max(rel);
        }
        per_group.push((PARAM_GROUPS[group], group_max));
        max_rel = max_rel.max(group_max);
    }
    Ok(GradCheckReport {
        per_group,
        max_rel_error: max_rel,
    })
}

fn central_difference(
    params: &crate::model::Params,
    input: &Matrix,
    eps: &[Vec<f64>],
    cfg: &ModelConfig,
    group: usize,
    idx: usize,
    step: f64,
) -> Result<f64> {
    let mut plus = params.clone();
    plus.slices_mut()[group].1[idx] += step;
    let (loss_plus, _) = elbo_with_eps(&plus, input, input, eps, cfg)?;
    let mut minus = params.clone();
    minus.slices_mut()[group].1[idx] -= step;
    let (loss_minus, _) = elbo_with_eps(&minus, input, input, eps, cfg)?;
    Ok((loss_plus.lower_bound - loss_minus.lower_bound) / (2.0 * step))
}
