//! UMDAc followed by box-constrained Nelder–Mead on the multiplicative-noise
//! model, with a short EDA stage so the local step has work to do.
//!
//! ```text
//! cargo run --release --example refine [seed]
//! ```
//!
//! The model's second state explodes in finite time once it turns negative,
//! so many seeds give no usable series; the default seed 4 does.

use innovest::experiment::{self, ExperimentConfig};
use innovest::{refined_estimate, InnovationObjective, RngStream};

fn main() -> innovest::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut cfg = ExperimentConfig::for_model("mult")?;
    cfg.seed = seed;
    cfg.umdac.generations = 10;

    let (_, obs) = experiment::observations(&cfg)?;
    let problem = experiment::problem(&cfg, obs)?;
    let objective = InnovationObjective::with_options(&problem, cfg.filter);
    let mut rng = RngStream::new(seed, 0);
    let r = refined_estimate(&objective, &problem.param_box, &cfg.umdac, &cfg.local, &mut rng)?;

    println!("umdac:   {:.4?}  q = {:.6}", r.eda.alpha_hat, r.eda.fitness);
    println!(
        "refined: {:.4?}  q = {:.6}  ({} simplex iterations, stop {:?})",
        r.best.alpha_hat, r.best.fitness, r.local.iterations, r.local.stop
    );
    Ok(())
}
