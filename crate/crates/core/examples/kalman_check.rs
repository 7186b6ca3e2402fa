//! Runs the LL filter on an Ornstein–Uhlenbeck model, where the linearization
//! is exact, and compares `q(θ)` with a scalar discrete Kalman filter.
//!
//! ```text
//! cargo run --release --example kalman_check
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use innovest::model::OrnsteinUhlenbeck;
use innovest::simulate::{simulate_observations, SimulationSettings};
use innovest::{q_fitness, EstimationProblem, ParameterBox, RngStream};
use nalgebra::{DMatrix, DVector};

const MU: f64 = 0.5;
const SIGMA: f64 = 0.3;
const OBS_VAR: f64 = 0.01;

/// Exact transition `x' = μ + (x − μ) e^{−θΔ}` with variance `σ²(1 − e^{−2θΔ}) / 2θ`.
fn kalman_q(theta: f64, delta: f64, z: &[f64], y0: f64, q0: f64) -> f64 {
    let phi = (-theta * delta).exp();
    let w = SIGMA * SIGMA * (1.0 - phi * phi) / (2.0 * theta);
    let (mut y, mut q) = (y0, q0);
    let mut total = 0.0;
    for zk in &z[1..] {
        let yp = MU + (y - MU) * phi;
        let qp = phi * phi * q + w;
        let s = qp + OBS_VAR;
        let nu = zk - yp;
        total += (2.0 * PI).ln() + s.ln() + nu * nu / s;
        let k = qp / s;
        y = yp + k * nu;
        q = (1.0 - k) * qp;
    }
    total
}

fn main() -> innovest::Result<()> {
    let model = OrnsteinUhlenbeck::new(MU, SIGMA, OBS_VAR);
    let settings = SimulationSettings { x0: vec![MU], t0: 0.0, h: 0.005, delta: 0.5, n_obs: 200 };
    let (_, obs) = simulate_observations(&model, &[1.0], &settings, &RngStream::new(3, 0))?;
    let z: Vec<f64> = obs.values.iter().map(|v| v[0]).collect();
    let problem = EstimationProblem::new(
        Arc::new(model),
        obs,
        ParameterBox::new(vec![0.2], vec![3.0])?,
        DVector::from_element(1, MU),
        DMatrix::from_element(1, 1, 0.01),
    )?;

    let mut worst: f64 = 0.0;
    for i in 0..=8 {
        let theta = 0.2 + 2.8 * i as f64 / 8.0;
        let ll = q_fitness(&problem, &[theta], 64).value;
        let exact = kalman_q(theta, 0.5, &z, MU, 0.01);
        let rel = ((ll - exact) / exact).abs();
        worst = worst.max(rel);
        println!("θ = {theta:.2}  LL {ll:12.6}  Kalman {exact:12.6}  rel {rel:.1e}");
    }
    println!("largest relative difference {worst:.1e}");
    Ok(())
}
