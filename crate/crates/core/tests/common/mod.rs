//! Shared fixtures: the scalar OU problem and an exact Kalman filter for it.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use innovest::model::OrnsteinUhlenbeck;
use innovest::simulate::{simulate_observations, SimulationSettings};
use innovest::{EstimationProblem, ParameterBox, RngStream};
use nalgebra::{DMatrix, DVector};

pub const OU_MU: f64 = 0.5;
pub const OU_SIGMA: f64 = 0.3;
pub const OU_OBS_VAR: f64 = 0.01;
pub const OU_THETA: f64 = 1.0;
pub const OU_DELTA: f64 = 0.5;
pub const OU_Q0: f64 = 0.01;

pub fn ou_box() -> ParameterBox {
    ParameterBox::new(vec![0.2], vec![3.0]).unwrap()
}

/// OU series simulated at θ = 1 with `h = 0.005`, filter started at `(μ, 0.01)`.
pub fn ou_problem(n_obs: usize, seed: u64) -> EstimationProblem {
    let model = OrnsteinUhlenbeck::new(OU_MU, OU_SIGMA, OU_OBS_VAR);
    let settings = SimulationSettings {
        x0: vec![OU_MU],
        t0: 0.0,
        h: 0.005,
        delta: OU_DELTA,
        n_obs,
    };
    let (_, obs) = simulate_observations(&model, &[OU_THETA], &settings, &RngStream::new(seed, 0)).unwrap();
    EstimationProblem::new(
        Arc::new(model),
        obs,
        ou_box(),
        DVector::from_element(1, OU_MU),
        DMatrix::from_element(1, 1, OU_Q0),
    )
    .unwrap()
}

pub struct KalmanRun {
    pub innovations: Vec<f64>,
    pub variances: Vec<f64>,
    pub q: f64,
}

/// Discrete Kalman filter on the exact OU transition
/// `x' = μ + φ (x − μ) + w`, `φ = e^{−θΔ}`, `Var w = σ² (1 − φ²) / 2θ`.
/// Written from scratch, independent of the crate's filter.
pub fn kalman_ou(theta: f64, z: &[f64], dt: &[f64]) -> KalmanRun {
    let (mut y, mut p) = (OU_MU, OU_Q0);
    let mut out = KalmanRun {
        innovations: Vec::new(),
        variances: Vec::new(),
        q: 0.0,
    };
    for (zk, &d) in z.iter().skip(1).zip(dt) {
        let phi = (-theta * d).exp();
        let w = OU_SIGMA * OU_SIGMA * (1.0 - phi * phi) / (2.0 * theta);
        let y_pred = OU_MU + phi * (y - OU_MU);
        let p_pred = phi * phi * p + w;
        let s = p_pred + OU_OBS_VAR;
        let nu = zk - y_pred;
        out.q += (2.0 * PI).ln() + s.ln() + nu * nu / s;
        out.innovations.push(nu);
        out.variances.push(s);
        let k = p_pred / s;
        y = y_pred + k * nu;
        p = (1.0 - k) * p_pred;
    }
    out
}

/// Scalar observations and gaps of a one-dimensional problem.
pub fn scalar_series(problem: &EstimationProblem) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = problem.observations.values.iter().map(|v| v[0]).collect();
    let dt: Vec<f64> = problem.observations.times.windows(2).map(|w| w[1] - w[0]).collect();
    (z, dt)
}

pub fn sphere(c: &[f64]) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
