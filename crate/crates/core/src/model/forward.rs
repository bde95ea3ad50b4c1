use crate::error::{Error, Result};
use crate::model::{
    kl_term_scaled, reparametrize, ForwardTrace, LatentStats, LossBreakdown, ModelConfig,
    Params, SampleTrace, LOG_SIGMA_CLAMP, OUTPUT_LOGIT_CLAMP,
};
use crate::numerics::{add_assign, sigmoid, softplus, GaussSource, Matrix};

fn check_frames(x: &Matrix, cfg: &ModelConfig, what: &str) -> Result<()> {
    if x.rows() != cfg.seq_len || x.cols() != cfg.data_dim {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, model expects {}x{}",
            x.rows(),
            x.cols(),
            cfg.seq_len,
            cfg.data_dim
        )));
    }
    Ok(())
}

/// Run the encoder recurrence over `x` and read the posterior off the last
/// state: h_0 = 0, h_{t+1} = tanh(W_enc h_t + W_in x_{t+1} + b_enc),
/// mu and log sigma affine in h_end (log sigma clamped).
///
/// Returns the posterior and the states h_1 .. h_T.
pub fn encode(
    p: &Params,
    x: &Matrix,
    cfg: &ModelConfig,
) -> Result<(LatentStats, Vec<Vec<f64>>)> {
    let (stats, states, _) = encode_full(p, x, cfg)?;
    Ok((stats, states))
}

pub(crate) fn encode_full(
    p: &Params,
    x: &Matrix,
    cfg: &ModelConfig,
) -> Result<(LatentStats, Vec<Vec<f64>>, Vec<f64>)> {
    check_frames(x, cfg, "input sequence")?;
    let h_dim = cfg.hidden_dim;
    let mut states = Vec::with_capacity(cfg.seq_len);
    let mut h = vec![0.0; h_dim];
    for t in 0..cfg.seq_len {
        let mut pre = p.w_enc.matvec(&h);
        add_assign(&mut pre, &p.w_in.matvec(x.row(t)));
        add_assign(&mut pre, &p.b_enc);
        h = pre.iter().map(|&v| v.tanh()).collect();
        states.push(h.clone());
    }
    let h_end = states.last().expect("seq_len >= 1");
    let mut mu = p.w_mu.matvec(h_end);
    add_assign(&mut mu, &p.b_mu);
    let mut log_sigma_raw = p.w_sigma.matvec(h_end);
    add_assign(&mut log_sigma_raw, &p.b_sigma);
    let log_sigma = log_sigma_raw
        .iter()
        .map(|&v| v.clamp(-LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP))
        .collect();
    Ok((LatentStats { mu, log_sigma }, states, log_sigma_raw))
}

/// Run the decoder with teacher forcing: g_0 = tanh(W_z z + b_z), emit
/// x_hat_t = sigmoid(W_out g_t + b_out) from every state, and advance with
/// the ground-truth frame, g_{t+1} = tanh(W_dec g_t + W_x x_t + b_dec).
///
/// Returns the output probabilities and the states g_0 .. g_{T-1}.
pub fn decode(
    p: &Params,
    z: &[f64],
    teacher: &Matrix,
    cfg: &ModelConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (_, probs, states) = decode_full(p, z, teacher, cfg)?;
    Ok((probs, states))
}

pub(crate) fn decode_full(
    p: &Params,
    z: &[f64],
    teacher: &Matrix,
    cfg: &ModelConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_frames(teacher, cfg, "teacher sequence")?;
    if z.len() != cfg.latent_dim {
        return Err(Error::Shape(format!(
            "latent vector has length {}, model expects {}",
            z.len(),
            cfg.latent_dim
        )));
    }
    let t_len = cfg.seq_len;
    let mut logits = Vec::with_capacity(t_len);
    let mut probs = Vec::with_capacity(t_len);
    let mut states = Vec::with_capacity(t_len);

    let mut pre = p.w_z.matvec(z);
    add_assign(&mut pre, &p.b_z);
    let mut g: Vec<f64> = pre.iter().map(|&v| v.tanh()).collect();

    for t in 0..t_len {
        states.push(g.clone());
        let mut a = p.w_out.matvec(&g);
        add_assign(&mut a, &p.b_out);
        for v in a.iter_mut() {
            *v = v.clamp(-OUTPUT_LOGIT_CLAMP, OUTPUT_LOGIT_CLAMP);
        }
        probs.push(a.iter().map(|&v| sigmoid(v)).collect());
        logits.push(a);
        if t + 1 < t_len {
            let mut pre = p.w_dec.matvec(&g);
            add_assign(&mut pre, &p.w_x.matvec(teacher.row(t)));
            add_assign(&mut pre, &p.b_dec);
            g = pre.iter().map(|&v| v.tanh()).collect();
        }
    }
    Ok((logits, probs, states))
}

/// Bernoulli log-likelihood of binary frames under the emitted
/// probabilities. Probabilities are converted to logits and evaluated as
/// `-softplus(-a)` / `-softplus(a)` so nothing ever takes log of zero.
pub fn bernoulli_ll(x: &Matrix, probs: &[Vec<f64>]) -> f64 {
    assert_eq!(
        x.rows(),
        probs.len(),
        "bernoulli_ll: {} target frames, {} probability frames",
        x.rows(),
        probs.len()
    );
    let mut total = 0.0;
    for (t, frame) in probs.iter().enumerate() {
        assert_eq!(x.cols(), frame.len(), "bernoulli_ll: frame {t} width");
        for (&target, &p) in x.row(t).iter().zip(frame) {
            let logit = p.ln() - (1.0 - p).ln();
            total += cell_ll(target, logit);
        }
    }
    total
}

/// Same likelihood straight from pre-sigmoid activations.
pub fn bernoulli_ll_logits(x: &Matrix, logits: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (t, frame) in logits.iter().enumerate() {
        for (&target, &a) in x.row(t).iter().zip(frame) {
            total += cell_ll(target, a);
        }
    }
    total
}

#[inline]
fn cell_ll(target: f64, logit: f64) -> f64 {
    // x log(sigmoid(a)) + (1-x) log(1 - sigmoid(a))
    target * -softplus(-logit) + (1.0 - target) * -softplus(logit)
}

/// The lower-bound estimator for one sequence: encode, sample the posterior
/// L times, decode each sample against the teacher frames, average the
/// reconstruction term, and add the analytic KL term.
///
/// `input` is the encoder-ordered view; `target` is the decoder
/// teacher/reconstruction sequence. They are the same matrix unless input
/// reversal is enabled.
pub fn elbo(
    p: &Params,
    input: &Matrix,
    target: &Matrix,
    src: &mut GaussSource,
    cfg: &ModelConfig,
) -> Result<(LossBreakdown, ForwardTrace)> {
    let eps: Vec<Vec<f64>> = (0..cfg.mc_samples)
        .map(|_| src.draw_vec(cfg.latent_dim))
        .collect();
    elbo_with_eps(p, input, target, &eps, cfg)
}

/// `elbo` with the noise fixed by the caller; this is the function the
/// finite-difference checks differentiate.
pub fn elbo_with_eps(
    p: &Params,
    input: &Matrix,
    target: &Matrix,
    eps: &[Vec<f64>],
    cfg: &ModelConfig,
) -> Result<(LossBreakdown, ForwardTrace)> {
    cfg.validate()?;
    p.validate(cfg)?;
    if eps.len() != cfg.mc_samples {
        return Err(Error::Shape(format!(
            "{} noise draws for {} Monte-Carlo samples",
            eps.len(),
            cfg.mc_samples
        )));
    }
    let (stats, enc_states, log_sigma_raw) = encode_full(p, input, cfg)?;
    let neg_kl = kl_term_scaled(&stats, cfg.kl_scale);

    let mut samples = Vec::with_capacity(cfg.mc_samples);
    let mut recon_sum = 0.0;
    for e in eps {
        let z = reparametrize(&stats, e);
        let (logits, probs, dec_states) = decode_full(p, &z, target, cfg)?;
        recon_sum += bernoulli_ll_logits(target, &logits);
        samples.push(SampleTrace {
            eps: e.clone(),
            z,
            dec_states,
            logits,
            probs,
        });
    }
    let recon_ll = recon_sum / cfg.mc_samples as f64;
    let lower_bound = recon_ll + neg_kl;
    let loss = LossBreakdown {
        recon_ll,
        neg_kl,
        lower_bound,
        per_timestep: lower_bound / cfg.seq_len as f64,
    };
    let trace = ForwardTrace {
        input: input.clone(),
        target: target.clone(),
        enc_states,
        stats,
        log_sigma_raw,
        samples,
    };
    Ok((loss, trace))
}
