//! Post-training tooling: encode datasets to latent coordinates, sample the
//! prior, interpolate between latents, and free-run the decoder to generate
//! sequences of arbitrary length.

use std::io::Write;

use crate::data::{Dataset, PianoRoll};
use crate::error::{Error, Result};
use crate::model::{encode, ModelConfig, Params, OUTPUT_LOGIT_CLAMP};
use crate::numerics::{add_assign, sigmoid, GaussSource, Matrix, Rng64};

/// Per-sequence latent coordinates, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTable {
    pub rows: Vec<LatentRow>,
    pub latent_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentRow {
    pub index: usize,
    pub label: String,
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

/// Deterministically encode every sequence: no sampling, just the posterior
/// mean and log-standard-deviation from the encoder.
pub fn encode_dataset(p: &Params, dataset: &Dataset, cfg: &ModelConfig) -> Result<LatentTable> {
    let mut rows = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let (input, _) = dataset.views(i);
        let (stats, _) = encode(p, input, cfg)?;
        rows.push(LatentRow {
            index: i,
            label: dataset.label(i).to_string(),
            mu: stats.mu,
            log_sigma: stats.log_sigma,
        });
    }
    Ok(LatentTable {
        rows,
        latent_dim: cfg.latent_dim,
    })
}

impl LatentTable {
    /// CSV with header `index,label,mu_0..mu_{J-1},logsigma_0..logsigma_{J-1}`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut header = String::from("index,label");
        for j in 0..self.latent_dim {
            header.push_str(&format!(",mu_{j}"));
        }
        for j in 0..self.latent_dim {
            header.push_str(&format!(",logsigma_{j}"));
        }
        writeln!(w, "{header}")?;
        for row in &self.rows {
            let mut line = format!("{},{}", row.index, csv_field(&row.label));
            for v in &row.mu {
                line.push_str(&format!(",{v}"));
            }
            for v in &row.log_sigma {
                line.push_str(&format!(",{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One draw from the standard-normal prior over the latent space.
pub fn sample_prior(latent_dim: usize, seed: u64) -> Vec<f64> {
    GaussSource::new(seed).draw_vec(latent_dim)
}

/// Straight line in latent space with both endpoints included.
pub fn interpolate(z_a: &[f64], z_b: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if z_a.len() != z_b.len() {
        return Err(Error::Shape(format!(
            "endpoints have lengths {} and {}",
            z_a.len(),
            z_b.len()
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidArg("interpolation needs at least 2 steps".into()));
    }
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let frac = k as f64 / (steps - 1) as f64;
        out.push(
            z_a.iter()
                .zip(z_b)
                .map(|(&a, &b)| a + frac * (b - a))
                .collect(),
        );
    }
    Ok(out)
}

/// How the decoder's own output is fed back as the next input frame during
/// free-running generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeedbackPolicy {
    /// Bernoulli-sample each cell; the default, since the decoder was
    /// trained on binary inputs.
    Sample { seed: u64 },
    /// Binarize at a fixed threshold; ties (probability equal to the
    /// threshold) resolve to 1.
    Threshold { threshold: f64 },
    /// Feed the raw probabilities back unrounded.
    Expectation,
}

impl FeedbackPolicy {
    pub fn validate(&self) -> Result<()> {
        if let FeedbackPolicy::Threshold { threshold } = self {
            if !(*threshold > 0.0 && *threshold < 1.0) {
                return Err(Error::InvalidArg(format!(
                    "threshold must be inside (0, 1), got {threshold}"
                )));
            }
        }
        Ok(())
    }
}

/// Free-run the decoder from a latent vector for `length` frames, feeding
/// its own output back through the policy. The roll's cells are the
/// sampled/thresholded frames; under the expectation policy the fed-back
/// values stay continuous and the roll is rounded at 0.5.
///
/// `rate` and `pitch_map` only annotate the output roll.
pub fn generate(
    p: &Params,
    z: &[f64],
    length: usize,
    policy: FeedbackPolicy,
    cfg: &ModelConfig,
    rate: f64,
    pitch_map: &[u8],
) -> Result<PianoRoll> {
    let (roll, _) = generate_with_probs(p, z, length, policy, cfg, rate, pitch_map)?;
    Ok(roll)
}

/// `generate`, also returning the pre-binarization probabilities (length x D).
pub fn generate_with_probs(
    p: &Params,
    z: &[f64],
    length: usize,
    policy: FeedbackPolicy,
    cfg: &ModelConfig,
    rate: f64,
    pitch_map: &[u8],
) -> Result<(PianoRoll, Matrix)> {
    policy.validate()?;
    if length == 0 {
        return Err(Error::InvalidArg("generation length must be at least 1".into()));
    }
    if z.len() != cfg.latent_dim {
        return Err(Error::Shape(format!(
            "latent vector has length {}, model expects {}",
            z.len(),
            cfg.latent_dim
        )));
    }
    let d = cfg.data_dim;
    let mut roll = PianoRoll::new(length, d, rate, pitch_map.to_vec())?;
    let mut probs = Matrix::zeros(length, d);
    let mut sampler = match policy {
        FeedbackPolicy::Sample { seed } => Some(Rng64::new(seed)),
        _ => None,
    };

    let mut pre = p.w_z.matvec(z);
    add_assign(&mut pre, &p.b_z);
    let mut state: Vec<f64> = pre.iter().map(|&v| v.tanh()).collect();

    for t in 0..length {
        let mut logits = p.w_out.matvec(&state);
        add_assign(&mut logits, &p.b_out);
        let frame_probs: Vec<f64> = logits
            .iter()
            .map(|&a| sigmoid(a.clamp(-OUTPUT_LOGIT_CLAMP, OUTPUT_LOGIT_CLAMP)))
            .collect();

        let feedback: Vec<f64> = match (&policy, sampler.as_mut()) {
            (FeedbackPolicy::Sample { .. }, Some(rng)) => frame_probs
                .iter()
                .map(|&pr| f64::from(rng.next_f64() < pr))
                .collect(),
            (FeedbackPolicy::Threshold { threshold }, _) => frame_probs
                .iter()
                .map(|&pr| f64::from(pr >= *threshold))
                .collect(),
            _ => frame_probs.clone(),
        };

        for (dd, &pr) in frame_probs.iter().enumerate() {
            probs.set(t, dd, pr);
            let cell = match policy {
                FeedbackPolicy::Expectation => u8::from(pr >= 0.5),
                _ => feedback[dd] as u8,
            };
            roll.set(t, dd, cell);
        }

        if t + 1 < length {
            let mut pre = p.w_dec.matvec(&state);
            add_assign(&mut pre, &p.w_x.matvec(&feedback));
            add_assign(&mut pre, &p.b_dec);
            state = pre.iter().map(|&v| v.tanh()).collect();
        }
    }
    Ok((roll, probs))
}
