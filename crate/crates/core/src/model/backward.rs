use crate::error::{Error, Result};
use crate::model::{
    ForwardTrace, Gradients, ModelConfig, Params, LOG_SIGMA_CLAMP, OUTPUT_LOGIT_CLAMP,
};
use crate::numerics::{add_assign, axpy};

fn validate_trace(p: &Params, trace: &ForwardTrace, cfg: &ModelConfig) -> Result<()> {
    let (d, h, j, t) = (cfg.data_dim, cfg.hidden_dim, cfg.latent_dim, cfg.seq_len);
    let ok = trace.input.rows() == t
        && trace.input.cols() == d
        && trace.target.rows() == t
        && trace.target.cols() == d
        && trace.enc_states.len() == t
        && trace.enc_states.iter().all(|s| s.len() == h)
        && trace.stats.mu.len() == j
        && trace.log_sigma_raw.len() == j
        && trace.samples.len() == cfg.mc_samples
        && trace.samples.iter().all(|s| {
            s.eps.len() == j
                && s.z.len() == j
                && s.dec_states.len() == t
                && s.dec_states.iter().all(|g| g.len() == h)
                && s.logits.len() == t
                && s.probs.len() == t
        })
        && p.w_enc.rows() == h
        && p.w_in.cols() == d
        && p.w_mu.rows() == j;
    if !ok {
        return Err(Error::Shape(
            "trace does not match the model it is being differentiated against".into(),
        ));
    }
    Ok(())
}

/// Exact gradient of `LossBreakdown::lower_bound` with respect to every
/// parameter group, for the noise stored in the trace.
///
/// The decoder is unrolled backward through its states (teacher-forced
/// inputs carry no gradient into earlier outputs), the sample path feeds
/// the posterior heads through the reparametrization (mu gets the latent
/// gradient unchanged, log sigma gets it scaled by eps * sigma), the KL
/// term contributes analytically, and the encoder is unrolled backward from
/// h_end. Clamped log-sigma coordinates receive zero gradient, as do
/// clamped output logits.
pub fn backward(p: &Params, trace: &ForwardTrace, cfg: &ModelConfig) -> Result<Gradients> {
    validate_trace(p, trace, cfg)?;
    let (h_dim, j_dim, t_len) = (cfg.hidden_dim, cfg.latent_dim, cfg.seq_len);
    let inv_l = 1.0 / cfg.mc_samples as f64;
    let mut g = Gradients::zeros(cfg);

    let sigma: Vec<f64> = trace.stats.log_sigma.iter().map(|&v| v.exp()).collect();
    let mut d_mu = vec![0.0; j_dim];
    let mut d_log_sigma = vec![0.0; j_dim];

    for sample in &trace.samples {
        // dL/da_t = (x_t - x_hat_t) / L, zeroed where the logit clamp is
        // active so the gradient matches the clamped forward value.
        let mut from_next: Vec<f64> = vec![0.0; h_dim];
        for t in (0..t_len).rev() {
            let delta_a: Vec<f64> = trace
                .target
                .row(t)
                .iter()
                .zip(&sample.probs[t])
                .zip(&sample.logits[t])
                .map(|((&x, &prob), &a)| {
                    if a.abs() >= OUTPUT_LOGIT_CLAMP {
                        0.0
                    } else {
                        (x - prob) * inv_l
                    }
                })
                .collect();
            let state = &sample.dec_states[t];
            g.w_out.add_outer(&delta_a, state);
            add_assign(&mut g.b_out, &delta_a);

            let mut d_state = p.w_out.matvec_transpose(&delta_a);
            add_assign(&mut d_state, &from_next);
            // through tanh at this state
            let du: Vec<f64> = d_state
                .iter()
                .zip(state)
                .map(|(&dv, &s)| dv * (1.0 - s * s))
                .collect();
            if t > 0 {
                g.w_dec.add_outer(&du, &sample.dec_states[t - 1]);
                g.w_x.add_outer(&du, trace.target.row(t - 1));
                add_assign(&mut g.b_dec, &du);
                from_next = p.w_dec.matvec_transpose(&du);
            } else {
                // g_0 = tanh(W_z z + b_z)
                g.w_z.add_outer(&du, &sample.z);
                add_assign(&mut g.b_z, &du);
                let dz = p.w_z.matvec_transpose(&du);
                for jj in 0..j_dim {
                    d_mu[jj] += dz[jj];
                    d_log_sigma[jj] += dz[jj] * sample.eps[jj] * sigma[jj];
                }
            }
        }
    }

    // Analytic KL contribution: d/dmu = -2 s mu, d/dlog_sigma = s (2 - 2 sigma^2).
    let s = cfg.kl_scale;
    for jj in 0..j_dim {
        d_mu[jj] += -2.0 * s * trace.stats.mu[jj];
        d_log_sigma[jj] += s * (2.0 - 2.0 * sigma[jj] * sigma[jj]);
        if trace.log_sigma_raw[jj].abs() >= LOG_SIGMA_CLAMP {
            d_log_sigma[jj] = 0.0;
        }
    }

    let h_end = trace.enc_states.last().expect("seq_len >= 1");
    g.w_mu.add_outer(&d_mu, h_end);
    add_assign(&mut g.b_mu, &d_mu);
    g.w_sigma.add_outer(&d_log_sigma, h_end);
    add_assign(&mut g.b_sigma, &d_log_sigma);

    let mut d_h = p.w_mu.matvec_transpose(&d_mu);
    axpy_vec(&mut d_h, &p.w_sigma.matvec_transpose(&d_log_sigma));

    // Encoder BPTT over h_T .. h_1; h_0 is zero so the recurrence weight
    // picks up nothing from the first step.
    for t in (0..t_len).rev() {
        let state = &trace.enc_states[t];
        let dv: Vec<f64> = d_h
            .iter()
            .zip(state)
            .map(|(&dh, &s)| dh * (1.0 - s * s))
            .collect();
        g.w_in.add_outer(&dv, trace.input.row(t));
        add_assign(&mut g.b_enc, &dv);
        if t > 0 {
            g.w_enc.add_outer(&dv, &trace.enc_states[t - 1]);
            d_h = p.w_enc.matvec_transpose(&dv);
        }
    }

    Ok(g)
}

fn axpy_vec(y: &mut [f64], x: &[f64]) {
    axpy(y, 1.0, x);
}
