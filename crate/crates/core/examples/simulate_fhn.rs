//! Simulates the stochastic FitzHugh–Nagumo neuron and prints the spike
//! count and observation summary.
//!
//! ```text
//! cargo run --release --example simulate_fhn [seed]
//! ```

use innovest::model::FitzHughNagumo;
use innovest::simulate::{simulate_observations, SimulationSettings};
use innovest::RngStream;

fn main() -> innovest::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let settings = SimulationSettings {
        x0: FitzHughNagumo::X0.to_vec(),
        t0: 0.0,
        h: 0.0005,
        delta: 0.5,
        n_obs: 500,
    };
    let rng = RngStream::new(seed, 0);
    let (path, obs) = simulate_observations(&FitzHughNagumo, &FitzHughNagumo::TRUE_ALPHA, &settings, &rng)?;

    // upward crossings of x1 = 0 on the fine grid
    let spikes = path
        .iter()
        .zip(path.iter().skip(1))
        .filter(|(a, b)| a[0] < 0.0 && b[0] >= 0.0)
        .count();
    let (lo, hi) = path
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[0]), hi.max(x[0])));

    println!("seed {seed}: {} fine steps, {} observations", path.len() - 1, obs.len());
    println!("x1 in [{lo:.3}, {hi:.3}], {spikes} spikes");
    for (t, z) in obs.times.iter().zip(&obs.values).take(5) {
        println!("t = {t:5.1}  z = ({:+.4}, {:+.4})", z[0], z[1]);
    }
    Ok(())
}
