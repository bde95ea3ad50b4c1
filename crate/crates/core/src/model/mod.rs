//! The variational recurrent auto-encoder: a recurrent encoder mapping a
//! whole fixed-length binary sequence to a diagonal-Gaussian latent
//! distribution, a recurrent decoder with per-cell Bernoulli outputs, the
//! reparametrized lower-bound estimator, and hand-derived backpropagation
//! through time.
//!
//! Sign convention: `backward` returns gradients for gradient *ascent* of
//! the lower bound. The optimizer negates internally (it minimizes the
//! negative bound).

mod backward;
mod forward;
pub mod gradcheck;
mod params;

pub use backward::backward;
pub use forward::{
    bernoulli_ll, bernoulli_ll_logits, decode, elbo, elbo_with_eps, encode,
};
pub use params::{init_params, Gradients, Params, PARAM_GROUPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Log-standard-deviations are clamped to this magnitude before
/// exponentiation; clamped coordinates get zero gradient.
pub const LOG_SIGMA_CLAMP: f64 = 10.0;

/// Output logits are clamped to this magnitude so probabilities stay
/// strictly inside (0, 1) in f64.
pub const OUTPUT_LOGIT_CLAMP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Frame dimension D (pitch count after pruning).
    pub data_dim: usize,
    /// Recurrent state size H.
    pub hidden_dim: usize,
    /// Latent dimension J.
    pub latent_dim: usize,
    /// Frames per training sequence T.
    pub seq_len: usize,
    /// Monte-Carlo samples L per sequence in the reconstruction term.
    pub mc_samples: usize,
    /// Weight on the analytic KL sum. 0.5 is the standard closed form;
    /// 1.0 reproduces the estimator with the half absorbed.
    pub kl_scale: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0
            || self.hidden_dim == 0
            || self.latent_dim == 0
            || self.seq_len == 0
            || self.mc_samples == 0
        {
            return Err(Error::InvalidArg(
                "model dimensions and sample count must all be at least 1".into(),
            ));
        }
        if !(self.kl_scale.is_finite() && self.kl_scale > 0.0) {
            return Err(Error::InvalidArg(format!(
                "kl_scale must be positive and finite, got {}",
                self.kl_scale
            )));
        }
        Ok(())
    }
}

/// Per-sequence posterior parameters; `log_sigma` is already clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentStats {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

/// `z = mu + exp(log_sigma) * eps`, elementwise.
pub fn reparametrize(stats: &LatentStats, eps: &[f64]) -> Vec<f64> {
    assert_eq!(
        stats.mu.len(),
        eps.len(),
        "reparametrize: {} latent coordinates, {} noise values",
        stats.mu.len(),
        eps.len()
    );
    stats
        .mu
        .iter()
        .zip(&stats.log_sigma)
        .zip(eps)
        .map(|((&m, &ls), &e)| m + ls.exp() * e)
        .collect()
}

/// Negative KL divergence from the posterior to the standard-normal prior,
/// `0.5 * sum_j (1 + 2 log sigma_j - mu_j^2 - sigma_j^2)`. Always <= 0.
pub fn kl_term(stats: &LatentStats) -> f64 {
    kl_term_scaled(stats, 0.5)
}

/// Same sum with an explicit scale in place of the half.
pub fn kl_term_scaled(stats: &LatentStats, scale: f64) -> f64 {
    let mut sum = 0.0;
    for (&m, &ls) in stats.mu.iter().zip(&stats.log_sigma) {
        let s = ls.exp();
        sum += 1.0 + 2.0 * ls - m * m - s * s;
    }
    scale * sum
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Encoder-ordered input frames, T x D.
    pub input: Matrix,
    /// Decoder teacher / reconstruction target frames, T x D.
    pub target: Matrix,
    /// Encoder states h_1 .. h_T (h_0 is the zero vector).
    pub enc_states: Vec<Vec<f64>>,
    pub stats: LatentStats,
    /// Log-standard-deviations before clamping, for the clamp mask.
    pub log_sigma_raw: Vec<f64>,
    /// One entry per Monte-Carlo sample.
    pub samples: Vec<SampleTrace>,
}

#[derive(Clone, Debug)]
pub struct SampleTrace {
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
    /// Decoder states g_0 .. g_{T-1}.
    pub dec_states: Vec<Vec<f64>>,
    /// Clamped output logits a_0 .. a_{T-1}.
    pub logits: Vec<Vec<f64>>,
    /// sigmoid(a_t); strictly inside (0, 1).
    pub probs: Vec<Vec<f64>>,
}

/// The lower bound and its two parts, in nats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    /// Monte-Carlo estimate of the expected reconstruction log-likelihood.
    pub recon_ll: f64,
    /// Negative KL divergence; never positive.
    pub neg_kl: f64,
    /// recon_ll + neg_kl.
    pub lower_bound: f64,
    /// lower_bound / T, the reported training metric.
    pub per_timestep: f64,
}
