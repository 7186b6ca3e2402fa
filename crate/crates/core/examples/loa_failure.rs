//! Nelder–Mead alone from uniform random starts on the FitzHugh–Nagumo
//! problem. Some runs stall in a box corner with `q` orders of magnitude
//! above the EDA optimum.
//!
//! ```text
//! cargo run --release --example loa_failure [starts]
//! ```

use innovest::experiment::{self, ExperimentConfig};
use innovest::{loa_estimate, InnovationObjective};

fn main() -> innovest::Result<()> {
    let starts: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = ExperimentConfig::for_model("fhn")?;
    let (_, obs) = experiment::observations(&cfg)?;
    let problem = experiment::problem(&cfg, obs)?;
    let objective = InnovationObjective::with_options(&problem, cfg.filter);

    let mut failed = 0;
    for rep in 0..starts {
        let mut rng = experiment::repetition_stream(cfg.seed, rep);
        let r = loa_estimate(&objective, &problem.param_box, &cfg.local, &mut rng)?;
        if !r.result.converged {
            failed += 1;
        }
        println!(
            "start {rep}: q0 = {:.3e} -> q = {:.3e} at {:.3?}, {:?}, converged {}",
            r.start_fitness, r.result.fitness, r.result.alpha_hat, r.stop, r.result.converged
        );
    }
    println!("{failed} of {starts} runs did not converge");
    Ok(())
}
