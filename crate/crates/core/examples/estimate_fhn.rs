//! One UMDAc innovation estimate of the FitzHugh–Nagumo parameters from a
//! simulated series (N = 500, Δ = 0.5). Takes about a minute.
//!
//! ```text
//! cargo run --release --example estimate_fhn [seed] [generations]
//! ```

use innovest::experiment::{self, ExperimentConfig};

fn main() -> innovest::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().ok());
    let seed = args.next().flatten().unwrap_or(1);
    let mut cfg = ExperimentConfig::for_model("fhn")?;
    cfg.seed = seed;
    if let Some(g) = args.next().flatten() {
        cfg.umdac.generations = g as usize;
    }

    let (_, obs) = experiment::observations(&cfg)?;
    let problem = experiment::problem(&cfg, obs)?;
    let truth = innovest::q_fitness_with(&problem, &cfg.true_alpha, &cfg.filter);
    println!("q at the true parameter: {:.6e}", truth.value);

    let r = experiment::run_estimation(&cfg, &problem, 0)?;
    for g in r.trace.iter().filter(|g| g.generation % 10 == 0) {
        println!("gen {:3}  best {:.6e}  mu {:.4?}", g.generation, g.best, g.mu);
    }
    println!(
        "alpha = {:.4?}, q = {:.6e}, {} evaluations, {:.1} s",
        r.alpha_hat, r.fitness, r.evaluations, r.wall_time
    );
    Ok(())
}
