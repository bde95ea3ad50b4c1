use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::{Matrix, Rng64};

/// All weight matrices and bias vectors of the encoder, the latent heads,
/// and the decoder. Field order here is the array order of the checkpoint
/// file, so do not reorder.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// Encoder recurrence, H x H.
    pub w_enc: Matrix,
    /// Encoder input projection, H x D.
    pub w_in: Matrix,
    pub b_enc: Vec<f64>,
    /// Latent mean head, J x H.
    pub w_mu: Matrix,
    pub b_mu: Vec<f64>,
    /// Latent log-standard-deviation head, J x H.
    pub w_sigma: Matrix,
    pub b_sigma: Vec<f64>,
    /// Latent to initial decoder state, H x J.
    pub w_z: Matrix,
    pub b_z: Vec<f64>,
    /// Decoder recurrence, H x H.
    pub w_dec: Matrix,
    /// Decoder input projection (teacher frame), H x D.
    pub w_x: Matrix,
    pub b_dec: Vec<f64>,
    /// Output head, D x H.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Gradients are shaped exactly like the parameters they belong to.
pub type Gradients = Params;

/// Parameter group names, in checkpoint array order.
pub const PARAM_GROUPS: [&str; 14] = [
    "w_enc", "w_in", "b_enc", "w_mu", "b_mu", "w_sigma", "b_sigma", "w_z", "b_z", "w_dec",
    "w_x", "b_dec", "w_out", "b_out",
];

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, h, j) = (cfg.data_dim, cfg.hidden_dim, cfg.latent_dim);
        Params {
            w_enc: Matrix::zeros(h, h),
            w_in: Matrix::zeros(h, d),
            b_enc: vec![0.0; h],
            w_mu: Matrix::zeros(j, h),
            b_mu: vec![0.0; j],
            w_sigma: Matrix::zeros(j, h),
            b_sigma: vec![0.0; j],
            w_z: Matrix::zeros(h, j),
            b_z: vec![0.0; h],
            w_dec: Matrix::zeros(h, h),
            w_x: Matrix::zeros(h, d),
            b_dec: vec![0.0; h],
            w_out: Matrix::zeros(d, h),
            b_out: vec![0.0; d],
        }
    }

    /// (name, rows, cols) per group; biases are column vectors.
    pub fn shapes(cfg: &ModelConfig) -> [(&'static str, usize, usize); 14] {
        let (d, h, j) = (cfg.data_dim, cfg.hidden_dim, cfg.latent_dim);
        [
            ("w_enc", h, h),
            ("w_in", h, d),
            ("b_enc", h, 1),
            ("w_mu", j, h),
            ("b_mu", j, 1),
            ("w_sigma", j, h),
            ("b_sigma", j, 1),
            ("w_z", h, j),
            ("b_z", h, 1),
            ("w_dec", h, h),
            ("w_x", h, d),
            ("b_dec", h, 1),
            ("w_out", d, h),
            ("b_out", d, 1),
        ]
    }

    pub fn slices(&self) -> [(&'static str, &[f64]); 14] {
        [
            ("w_enc", self.w_enc.data()),
            ("w_in", self.w_in.data()),
            ("b_enc", &self.b_enc),
            ("w_mu", self.w_mu.data()),
            ("b_mu", &self.b_mu),
            ("w_sigma", self.w_sigma.data()),
            ("b_sigma", &self.b_sigma),
            ("w_z", self.w_z.data()),
            ("b_z", &self.b_z),
            ("w_dec", self.w_dec.data()),
            ("w_x", self.w_x.data()),
            ("b_dec", &self.b_dec),
            ("w_out", self.w_out.data()),
            ("b_out", &self.b_out),
        ]
    }

    pub fn slices_mut(&mut self) -> [(&'static str, &mut [f64]); 14] {
        [
            ("w_enc", self.w_enc.data_mut()),
            ("w_in", self.w_in.data_mut()),
            ("b_enc", &mut self.b_enc),
            ("w_mu", self.w_mu.data_mut()),
            ("b_mu", &mut self.b_mu),
            ("w_sigma", self.w_sigma.data_mut()),
            ("b_sigma", &mut self.b_sigma),
            ("w_z", self.w_z.data_mut()),
            ("b_z", &mut self.b_z),
            ("w_dec", self.w_dec.data_mut()),
            ("w_x", self.w_x.data_mut()),
            ("b_dec", &mut self.b_dec),
            ("w_out", self.w_out.data_mut()),
            ("b_out", &mut self.b_out),
        ]
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let shapes = Params::shapes(cfg);
        for ((name, rows, cols), (got_name, slice)) in shapes.iter().zip(self.slices()) {
            debug_assert_eq!(*name, got_name);
            if slice.len() != rows * cols {
                return Err(Error::Shape(format!(
                    "parameter group {name} has {} entries, expected {rows}x{cols}",
                    slice.len()
                )));
            }
            if !slice.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter group {name}")));
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Params) {
        for ((_, dst), (_, src)) in self.slices_mut().into_iter().zip(other.slices()) {
            crate::numerics::add_assign(dst, src);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for (_, dst) in self.slices_mut() {
            crate::numerics::scale(dst, a);
        }
    }

    pub fn total_len(&self) -> usize {
        self.slices().iter().map(|(_, s)| s.len()).sum()
    }
}

/// Glorot-uniform weights (each matrix uniform in [-a, a] with
/// a = sqrt(6 / (fan_in + fan_out))), zero biases. Deterministic in `seed`:
/// groups are filled in declaration order from one SplitMix64 stream.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Params {
    let mut rng = Rng64::new(seed);
    let mut p = Params::zeros(cfg);
    for m in [
        &mut p.w_enc,
        &mut p.w_in,
        &mut p.w_mu,
        &mut p.w_sigma,
        &mut p.w_z,
        &mut p.w_dec,
        &mut p.w_x,
        &mut p.w_out,
    ] {
        let a = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
        for v in m.data_mut() {
            *v = rng.uniform(-a, a);
        }
    }
    p
}
