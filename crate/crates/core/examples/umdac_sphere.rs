//! UMDAc on a shifted sphere in three dimensions.
//!
//! ```text
//! cargo run --release --example umdac_sphere [seed]
//! ```

use innovest::objective::FnObjective;
use innovest::{umdac_minimize, ParameterBox, RngStream, UmdacConfig};

fn main() -> innovest::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let c = [1.5, -2.0, 0.25];
    let sphere = FnObjective::new(3, |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum());
    let bx = ParameterBox::new(vec![-5.0; 3], vec![5.0; 3])?;
    let cfg = UmdacConfig::for_params(3);

    let r = umdac_minimize(&sphere, &bx, &cfg, &mut RngStream::new(seed, 0))?;
    for g in r.trace.iter().step_by(10) {
        println!("gen {:3}  best {:.3e}  sigma {:.2e}", g.generation, g.best, g.sigma[0]);
    }
    let err = r.alpha_hat.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("alpha = {:?}", r.alpha_hat);
    println!("max error {err:.2e} after {} evaluations", r.evaluations);
    Ok(())
}
