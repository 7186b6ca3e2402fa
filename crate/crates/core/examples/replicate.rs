//! A small replication study driven by a config string, as the `innovest
//! replicate` subcommand would run it from a file.
//!
//! ```text
//! cargo run --release --example replicate
//! ```

use innovest::experiment::{cmd_replicate, ConfigMap, ExperimentConfig};

const CONFIG: &str = "
model = mult
seed = 4
reps = 3
umdac.generations = 15
hist.bins = 10
";

fn main() -> innovest::Result<()> {
    let mut map: ConfigMap = CONFIG.parse()?;
    let out = std::env::temp_dir().join("innovest-replicate");
    map.set("out", &out.to_string_lossy())?;
    let cfg = ExperimentConfig::from_map(&map)?;

    let o = cmd_replicate(&cfg)?;
    for r in &o.records {
        println!("rep {}: q = {:.4}, alpha = {:.4?}", r.rep, r.fitness, r.alpha_hat);
    }
    let s = &o.summary;
    println!("{} runs, {} failures, {:.1} s", s.runs, s.failures, s.runtime);
    for p in &s.parameters {
        println!("{:>3}: mean {:+.4}  sd {:.4}  [{:+.4}, {:+.4}]", p.name, p.mean, p.std, p.min, p.max);
    }
    println!("wrote runs.csv, summary.csv, histograms.csv to {}", out.display());
    Ok(())
}
