//! `gradcheck`: finite-difference audit of every backward pass, ending with
//! a full parameter sweep of a reduced end-to-end model.

use anyhow::{bail, Result};
use clap::Args;
use echograph::gradcheck::{run_full_audit, run_layer_checks};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed for the random weights, inputs and projections.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Skip the end-to-end sweep and audit individual layers only.
    #[arg(long)]
    pub layers_only: bool,
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let results = if args.layers_only {
        run_layer_checks(args.seed)?
    } else {
        run_full_audit(args.seed)?
    };
    let mut failures = 0usize;
    for check in &results {
        let verdict = if check.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<20} max rel err {:>10.3e}  (tolerance {:.0e})  {verdict}",
            check.name, check.max_rel_err, check.tolerance,
        );
        if !check.passed() {
            failures += 1;
        }
    }
    let worst = results.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    println!("worst relative error: {worst:.3e}");
    if failures > 0 {
        bail!("{failures} gradient check(s) exceeded tolerance");
    }
    Ok(())
}
