//! Sweeps each coordinate of the multiplicative-noise model across its
//! search interval and reports how much `q` varies along it.
//!
//! ```text
//! cargo run --release --example fitness_slice [grid]
//! ```

use innovest::experiment::{cmd_fitness_slice, slice_ranges, ExperimentConfig};

fn main() -> innovest::Result<()> {
    let mut cfg = ExperimentConfig::for_model("mult")?;
    cfg.seed = 4;
    cfg.slice_grid = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(21);
    cfg.out = std::env::temp_dir().join("innovest-slice");

    let points = cmd_fitness_slice(&cfg)?;
    let names = cfg.param_box.names().to_vec();
    for (i, range) in slice_ranges(&points, names.len()).iter().enumerate() {
        let best = points
            .iter()
            .filter(|s| s.coord == i)
            .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
            .unwrap();
        println!("{:>3}: q range {range:10.3}, lowest at {:+.4}", names[i], best.value);
    }
    println!("wrote {}", cfg.out.join("slice.csv").display());
    Ok(())
}
