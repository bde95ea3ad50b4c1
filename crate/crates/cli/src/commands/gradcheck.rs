use anyhow::{bail, Result};
use clap::Args;
use vrae_core::model::gradcheck::{finite_difference_check, reference_config, DEFAULT_STEP};

use crate::util::print_config;

const TOLERANCE: f64 = 1e-4;

/// Check the analytic gradients against central finite differences on the
/// reference toy model. Fails (nonzero exit) above 1e-4 relative error.
#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Seed for the random model, data, and noise.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let cfg = reference_config();
    print_config(
        "gradcheck",
        &[
            ("seed", args.seed.to_string()),
            ("data-dim", cfg.data_dim.to_string()),
            ("hidden", cfg.hidden_dim.to_string()),
            ("latent", cfg.latent_dim.to_string()),
            ("window", cfg.seq_len.to_string()),
            ("mc-samples", cfg.mc_samples.to_string()),
            ("step", DEFAULT_STEP.to_string()),
            ("tolerance", TOLERANCE.to_string()),
        ],
    );

    let report = finite_difference_check(&cfg, args.seed, DEFAULT_STEP)?;
    for (name, err) in &report.per_group {
        println!("  {name:<8} max relative error {err:.3e}");
    }
    println!("max relative error {:.3e}", report.max_rel_error);
    if report.max_rel_error > TOLERANCE {
        bail!(
            "gradient check failed: {:.3e} exceeds {TOLERANCE:.0e}",
            report.max_rel_error
        );
    }
    println!("gradient check passed");
    Ok(())
}
