//! Named hyperparameter presets for the two reference configurations.
//!
//! `paper-2d`: 500 hidden units, 2 latent dimensions, non-overlapping
//! 50-step windows, learning rate decaying geometrically from 1e-3 to 5e-6
//! over the requested epochs.
//!
//! `paper-20d`: 20 latent dimensions, 40-step windows with 50% overlap,
//! learning rate 2e-5 stepping to 1e-5 at epoch 16000. The hidden size is
//! not pinned by the reference experiment; 500 is assumed.

use anyhow::{bail, Result};
use vrae_core::optimizer::LrSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Paper2d,
    Paper20d,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "paper-2d" => Ok(Preset::Paper2d),
            "paper-20d" => Ok(Preset::Paper20d),
            other => bail!("unknown preset {other:?}; available: paper-2d, paper-20d"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Paper2d => "paper-2d",
            Preset::Paper20d => "paper-20d",
        }
    }

    pub fn hidden(&self) -> usize {
        500
    }

    pub fn latent(&self) -> usize {
        match self {
            Preset::Paper2d => 2,
            Preset::Paper20d => 20,
        }
    }

    pub fn window(&self) -> usize {
        match self {
            Preset::Paper2d => 50,
            Preset::Paper20d => 40,
        }
    }

    pub fn stride(&self) -> usize {
        match self {
            Preset::Paper2d => 50,
            Preset::Paper20d => 20,
        }
    }

    /// The preset schedule; the 2d preset needs the epoch budget to place
    /// its final rate.
    pub fn schedule(&self, epochs: usize) -> Result<LrSchedule> {
        let sched = match self {
            Preset::Paper2d => {
                if epochs < 2 {
                    LrSchedule::constant(1e-3)
                } else {
                    LrSchedule::geometric(vec![(0, 1e-3), (epochs - 1, 5e-6)])?
                }
            }
            Preset::Paper20d => LrSchedule::step(vec![(0, 2e-5), (16000, 1e-5)])?,
        };
        Ok(sched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_lookup() {
        assert_eq!(Preset::parse("paper-2d").unwrap(), Preset::Paper2d);
        assert_eq!(Preset::parse("paper-20d").unwrap(), Preset::Paper20d);
        assert!(Preset::parse("paper-3d").is_err());
    }

    #[test]
    fn two_d_schedule_hits_both_endpoints() {
        let sched = Preset::Paper2d.schedule(1000).unwrap();
        assert_eq!(sched.lr_at(0), 1e-3);
        assert!((sched.lr_at(999) - 5e-6).abs() < 1e-18);
        assert!(sched.lr_at(500) < 1e-3);
        assert!(sched.lr_at(500) > 5e-6);
    }

    #[test]
    fn twenty_d_schedule_steps_at_16000() {
        let sched = Preset::Paper20d.schedule(20000).unwrap();
        assert_eq!(sched.lr_at(0), 2e-5);
        assert_eq!(sched.lr_at(15999), 2e-5);
        assert_eq!(sched.lr_at(16000), 1e-5);
    }
}
