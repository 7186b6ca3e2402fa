use nalgebra::{DMatrix, DVector};

use super::{ParameterBox, StateSpaceModel};
use crate::error::{Error, Result};

/// Two-state diffusion with multiplicative noise and a scalar nonlinear
/// observation:
///
/// ```text
/// dx₁ = (α₁ + α₂ x₁) dt + α₃ √x₁ dw₁
/// dx₂ = α₄ x₂² dt + α₅ x₁² dw₂
/// z_k = x₂ − 0.001 x₂³ + (x₂ − 0.01 x₂²) ξ_k + e_k
/// ```
///
/// with `ξ_k, e_k ~ N(0, 0.01)`. The filter only sees `h0 = x₂ − 0.001 x₂³`
/// and `Σ = 0.01`; the `ξ` term is used when generating data.
///
/// `√x₁` is evaluated as `√max(x₁, 0)`. [`MultiplicativeNoise::raw_sqrt_diffusion`]
/// reports the unclamped domain violation instead.
#[derive(Clone, Copy, Debug, Default)]
pub struct MultiplicativeNoise;

impl MultiplicativeNoise {
    pub const OBS_VAR: f64 = 0.01;
    pub const XI_VAR: f64 = 0.01;
    pub const TRUE_ALPHA: [f64; 5] = [1.0, -1.5, 0.1, -1.0, 0.01];
    pub const X0: [f64; 2] = [0.5, 0.5];

    pub fn search_box() -> ParameterBox {
        ParameterBox::new(
            vec![0.0, -3.0, 0.0, -3.0, 0.0],
            vec![2.0, 0.0, 0.3, 0.0, 0.1],
        )
        .and_then(|b| b.with_true_values(Self::TRUE_ALPHA.to_vec()))
        .expect("static box is valid")
    }

    /// `g₁` without clamping; fails for `x₁ < 0`.
    pub fn raw_sqrt_diffusion(x: &[f64], alpha: &[f64]) -> Result<DVector<f64>> {
        if x[0] < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative x1 = {}", x[0])));
        }
        Ok(DVector::from_column_slice(&[alpha[2] * x[0].sqrt(), 0.0]))
    }
}

impl StateSpaceModel for MultiplicativeNoise {
    fn name(&self) -> &str {
        "mult"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn param_count(&self) -> usize {
        5
    }

    fn drift(&self, _t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        out[0] = alpha[0] + alpha[1] * x[0];
        out[1] = alpha[3] * x[1] * x[1];
    }

    fn diffusion(&self, _t: f64, x: &[f64], alpha: &[f64], channel: usize, out: &mut [f64]) {
        match channel {
            0 => {
                out[0] = alpha[2] * x[0].max(0.0).sqrt();
                out[1] = 0.0;
            }
            _ => {
                out[0] = 0.0;
                out[1] = alpha[4] * x[0] * x[0];
            }
        }
    }

    fn obs_mean(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = x[1] - 0.001 * x[1].powi(3);
    }

    fn obs_noise_cov(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, Self::OBS_VAR)
    }

    fn jac_drift(&self, _t: f64, x: &[f64], alpha: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[alpha[1], 0.0, 0.0, 2.0 * alpha[3] * x[1]],
        ))
    }

    fn jac_drift_into(&self, _t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[alpha[1], 0.0, 0.0, 2.0 * alpha[3] * x[1]]);
        true
    }

    fn jac_diffusion_into(&self, _t: f64, x: &[f64], alpha: &[f64], channel: usize, out: &mut [f64]) -> bool {
        out.fill(0.0);
        match channel {
            0 => {
                if x[0] > 0.0 {
                    out[0] = 0.5 * alpha[2] / x[0].sqrt();
                }
            }
            _ => out[2] = 2.0 * alpha[4] * x[0],
        }
        true
    }

    fn jac_diffusion(&self, _t: f64, x: &[f64], alpha: &[f64], channel: usize) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(2, 2);
        match channel {
            0 => {
                if x[0] > 0.0 {
                    j[(0, 0)] = 0.5 * alpha[2] / x[0].sqrt();
                }
            }
            _ => j[(1, 0)] = 2.0 * alpha[4] * x[0],
        }
        Some(j)
    }

    fn jac_obs(&self, _t: f64, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(1, 2, &[0.0, 1.0 - 0.003 * x[1] * x[1]]))
    }

    fn extra_obs_noise_var(&self) -> Option<DVector<f64>> {
        Some(DVector::from_element(1, Self::XI_VAR))
    }

    fn extra_obs_noise(&self, _t: f64, x: &[f64], xi: &[f64], out: &mut [f64]) {
        out[0] += (x[1] - 0.01 * x[1] * x[1]) * xi[0];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_at_initial_state() {
        let mut f = [0.0; 2];
        MultiplicativeNoise.drift(
            0.0,
            &MultiplicativeNoise::X0,
            &MultiplicativeNoise::TRUE_ALPHA,
            &mut f,
        );
        assert!((f[0] - 0.25).abs() < 1e-15);
        assert!((f[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn observation_at_zero() {
        let mut z = [1.0];
        MultiplicativeNoise.obs_mean(0.0, &[0.7, 0.0], &mut z);
        assert_eq!(z[0], 0.0);
        let mut z = [0.0];
        MultiplicativeNoise.extra_obs_noise(0.0, &[0.7, 0.0], &[3.0], &mut z);
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn second_channel() {
        let mut g = [0.0; 2];
        let mut alpha = MultiplicativeNoise::TRUE_ALPHA;
        alpha[4] = 0.01;
        MultiplicativeNoise.diffusion(0.0, &[2.0, 0.3], &alpha, 1, &mut g);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn sqrt_domain() {
        let alpha = MultiplicativeNoise::TRUE_ALPHA;
        assert!(matches!(
            MultiplicativeNoise::raw_sqrt_diffusion(&[-0.1, 0.0], &alpha),
            Err(Error::Domain(_))
        ));
        let mut g = [1.0; 2];
        MultiplicativeNoise.diffusion(0.0, &[-0.1, 0.0], &alpha, 0, &mut g);
        assert_eq!(g, [0.0, 0.0]);
        let raw = MultiplicativeNoise::raw_sqrt_diffusion(&[0.25, 0.0], &alpha).unwrap();
        assert!((raw[0] - 0.05).abs() < 1e-15);
    }
}
