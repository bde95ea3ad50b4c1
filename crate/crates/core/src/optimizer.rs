//! Adam with bias correction, plus the stepwise learning-rate schedule.
//!
//! Convention note: decay rates here follow the modern parametrization
//! (decay1 = 0.95 keeps 95% of the first moment per step). Configurations
//! quoted in the complement convention, where the same behaviour is written
//! as 0.05, can be converted at the CLI boundary.
//!
//! The step *ascends*: gradients are of the lower bound, and the update is
//! `params += lr * m_hat / (sqrt(v_hat) + epsilon)`, which is identical to
//! descending the negative bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelConfig, Params};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    /// Exponential decay rate of the first-moment estimate.
    pub decay1: f64,
    /// Exponential decay rate of the second-moment estimate.
    pub decay2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            decay1: 0.95,
            decay2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.decay1) || !(0.0..1.0).contains(&self.decay2) {
            return Err(Error::InvalidArg(format!(
                "Adam decay rates must be in [0, 1), got {} and {}",
                self.decay1, self.decay2
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidArg("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moment accumulators shaped like the parameters, plus
/// the step counter driving bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(cfg: &ModelConfig) -> Self {
        AdamState {
            m: Gradients::zeros(cfg),
            v: Gradients::zeros(cfg),
            t: 0,
        }
    }
}

/// One Adam step in place. Errors on any non-finite gradient entry, naming
/// the parameter group it was found in.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut Params,
    ascent_grads: &Gradients,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    for (name, slice) in ascent_grads.slices() {
        if !slice.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient for {name}")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let corr1 = 1.0 - cfg.decay1.powi(t);
    let corr2 = 1.0 - cfg.decay2.powi(t);

    let mut m_slices = state.m.slices_mut();
    let mut v_slices = state.v.slices_mut();
    let mut p_slices = params.slices_mut();
    for (group, (_, grads)) in ascent_grads.slices().into_iter().enumerate() {
        let m = &mut m_slices[group].1;
        let v = &mut v_slices[group].1;
        let p = &mut p_slices[group].1;
        for i in 0..grads.len() {
            let g = grads[i];
            m[i] = cfg.decay1 * m[i] + (1.0 - cfg.decay1) * g;
            v[i] = cfg.decay2 * v[i] + (1.0 - cfg.decay2) * g * g;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] += lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Rescale gradients so their global L2 norm does not exceed `clip`.
pub fn clip_global_norm(grads: &mut Gradients, clip: f64) {
    let mut sq = 0.0;
    for (_, slice) in grads.slices() {
        for &g in slice {
            sq += g * g;
        }
    }
    let norm = sq.sqrt();
    if norm > clip {
        grads.scale(clip / norm);
    }
}

/// Piecewise learning-rate schedule: the rate of the last entry whose epoch
/// is not after the query. With `geometric`, rates are instead interpolated
/// geometrically between surrounding entries, which approximates a smooth
/// decay given only its endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    points: Vec<(usize, f64)>,
    geometric: bool,
}

impl LrSchedule {
    pub fn step(points: Vec<(usize, f64)>) -> Result<Self> {
        Self::new(points, false)
    }

    pub fn geometric(points: Vec<(usize, f64)>) -> Result<Self> {
        Self::new(points, true)
    }

    pub fn constant(rate: f64) -> Self {
        Self::new(vec![(0, rate)], false).expect("single positive rate")
    }

    fn new(points: Vec<(usize, f64)>, geometric: bool) -> Result<Self> {
        if points.first().map(|p| p.0) != Some(0) {
            return Err(Error::InvalidArg(
                "learning-rate schedule must start at epoch 0".into(),
            ));
        }
        if !points.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::InvalidArg(
                "learning-rate schedule epochs must be strictly increasing".into(),
            ));
        }
        if !points.iter().all(|&(_, r)| r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArg(
                "learning rates must be positive and finite".into(),
            ));
        }
        Ok(LrSchedule { points, geometric })
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn is_geometric(&self) -> bool {
        self.geometric
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let idx = match self.points.binary_search_by_key(&epoch, |p| p.0) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let (from, rate) = self.points[idx];
        if !self.geometric || idx + 1 == self.points.len() {
            return rate;
        }
        let (next_from, next_rate) = self.points[idx + 1];
        let frac = (epoch - from) as f64 / (next_from - from) as f64;
        rate * (next_rate / rate).powf(frac)
    }
}
