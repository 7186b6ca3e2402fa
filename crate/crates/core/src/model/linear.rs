use nalgebra::{DMatrix, DVector};

use super::StateSpaceModel;
use crate::error::{Error, Result};

/// Scalar Ornstein–Uhlenbeck process with the mean-reversion rate as the only
/// free parameter:
///
/// ```text
/// dx = θ (μ − x) dt + σ dw,   z_k = x(t_k) + e_k,  e_k ~ N(0, obs_var)
/// ```
///
/// Its transition density is Gaussian, which makes it the reference case for
/// checking the filter against an exact Kalman recursion.
#[derive(Clone, Copy, Debug)]
pub struct OrnsteinUhlenbeck {
    pub mu: f64,
    pub sigma: f64,
    pub obs_var: f64,
}

impl OrnsteinUhlenbeck {
    pub fn new(mu: f64, sigma: f64, obs_var: f64) -> Self {
        Self { mu, sigma, obs_var }
    }
}

impl StateSpaceModel for OrnsteinUhlenbeck {
    fn name(&self) -> &str {
        "ou"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn param_count(&self) -> usize {
        1
    }

    fn drift(&self, _t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] * (self.mu - x[0]);
    }

    fn diffusion(&self, _t: f64, _x: &[f64], _alpha: &[f64], _channel: usize, out: &mut [f64]) {
        out[0] = self.sigma;
    }

    fn obs_mean(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn obs_noise_cov(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.obs_var)
    }

    fn jac_drift(&self, _t: f64, _x: &[f64], alpha: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -alpha[0]))
    }

    fn jac_diffusion(&self, _t: f64, _x: &[f64], _alpha: &[f64], _c: usize) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }

    fn jac_obs(&self, _t: f64, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(1, 1))
    }
}

/// Time-invariant linear model without free parameters:
/// `dx = (F x + c) dt + Σᵢ gᵢ dwᵢ`, `z = H x + e`.
///
/// Jacobians are left to finite differences on purpose, so it also exercises
/// that path.
#[derive(Clone, Debug)]
pub struct LinearModel {
    drift_matrix: DMatrix<f64>,
    drift_offset: DVector<f64>,
    diffusion: Vec<DVector<f64>>,
    obs_matrix: DMatrix<f64>,
    obs_cov: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(
        drift_matrix: DMatrix<f64>,
        drift_offset: DVector<f64>,
        diffusion: Vec<DVector<f64>>,
        obs_matrix: DMatrix<f64>,
        obs_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let d = drift_matrix.nrows();
        let r = obs_matrix.nrows();
        let ok = drift_matrix.is_square()
            && drift_offset.len() == d
            && diffusion.iter().all(|g| g.len() == d)
            && obs_matrix.ncols() == d
            && obs_cov.nrows() == r
            && obs_cov.ncols() == r;
        if !ok {
            return Err(Error::InvalidParameter("inconsistent linear model shapes".into()));
        }
        Ok(Self {
            drift_matrix,
            drift_offset,
            diffusion,
            obs_matrix,
            obs_cov,
        })
    }
}

impl StateSpaceModel for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn state_dim(&self) -> usize {
        self.drift_matrix.nrows()
    }

    fn noise_dim(&self) -> usize {
        self.diffusion.len()
    }

    fn obs_dim(&self) -> usize {
        self.obs_matrix.nrows()
    }

    fn param_count(&self) -> usize {
        0
    }

    fn drift(&self, _t: f64, x: &[f64], _alpha: &[f64], out: &mut [f64]) {
        let d = self.state_dim();
        for i in 0..d {
            out[i] = self.drift_offset[i]
                + (0..d).map(|j| self.drift_matrix[(i, j)] * x[j]).sum::<f64>();
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64], _alpha: &[f64], channel: usize, out: &mut [f64]) {
        out.copy_from_slice(self.diffusion[channel].as_slice());
    }

    fn obs_mean(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| self.obs_matrix[(i, j)] * x[j]).sum();
        }
    }

    fn obs_noise_cov(&self) -> DMatrix<f64> {
        self.obs_cov.clone()
    }
}
