use nalgebra::DMatrix;

use super::{ParameterBox, StateSpaceModel};

/// Stochastic FitzHugh–Nagumo neuron, fully observed with small Gaussian error:
///
/// ```text
/// dx₁ = 100 (x₁ − x₁³/3 − x₂) dt
/// dx₂ = (α₁ + α₂ x₁) dt + α₃ dw
/// z_k = x(t_k) + e_k,  e_k ~ N(0, 10⁻⁶ I)
/// ```
#[derive(Clone, Copy, Debug, Default)]
pub struct FitzHughNagumo;

impl FitzHughNagumo {
    pub const OBS_VAR: f64 = 1e-6;
    pub const TRUE_ALPHA: [f64; 3] = [1.0, 1.0, 0.1];
    pub const X0: [f64; 2] = [-0.9323, -0.6732];

    pub fn search_box() -> ParameterBox {
        ParameterBox::new(vec![0.0, 0.0, 0.0], vec![5.0, 5.0, 1.0])
            .and_then(|b| b.with_true_values(Self::TRUE_ALPHA.to_vec()))
            .expect("static box is valid")
    }
}

impl StateSpaceModel for FitzHughNagumo {
    fn name(&self) -> &str {
        "fhn"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn param_count(&self) -> usize {
        3
    }

    fn drift(&self, _t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        out[0] = 100.0 * (x[0] - x[0].powi(3) / 3.0 - x[1]);
        out[1] = alpha[0] + alpha[1] * x[0];
    }

    fn diffusion(&self, _t: f64, _x: &[f64], alpha: &[f64], _channel: usize, out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = alpha[2];
    }

    fn obs_mean(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn obs_noise_cov(&self) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * Self::OBS_VAR
    }

    fn jac_drift(&self, _t: f64, x: &[f64], alpha: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[100.0 * (1.0 - x[0] * x[0]), -100.0, alpha[1], 0.0],
        ))
    }

    fn jac_diffusion(&self, _t: f64, _x: &[f64], _alpha: &[f64], _c: usize) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(2, 2))
    }

    fn jac_drift_into(&self, _t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[100.0 * (1.0 - x[0] * x[0]), -100.0, alpha[1], 0.0]);
        true
    }

    fn jac_diffusion_into(&self, _t: f64, _x: &[f64], _a: &[f64], _c: usize, out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }

    fn jac_obs(&self, _t: f64, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(2, 2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_at_initial_state() {
        let mut f = [0.0; 2];
        FitzHughNagumo.drift(0.0, &FitzHughNagumo::X0, &[1.0, 1.0, 0.1], &mut f);
        // 100(−0.9323 + 0.9323³/3 + 0.6732), 1 − 0.9323
        let x1: f64 = -0.9323;
        let expected = 100.0 * (x1 - x1.powi(3) / 3.0 + 0.6732);
        assert!((f[0] - expected).abs() < 1e-12);
        assert!((f[0] - 1.101).abs() < 1e-3, "f1 = {}", f[0]);
        assert!((f[1] - 0.0677).abs() < 1e-12);
    }

    #[test]
    fn jacobian_at_origin() {
        let j = FitzHughNagumo.jac_drift(0.0, &[0.0, 0.3], &[1.0, 2.5, 0.1]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[100.0, -100.0, 2.5, 0.0]));
    }

    #[test]
    fn diffusion_is_state_independent() {
        let mut g = [9.0; 2];
        for x in [[0.0, 0.0], [2.0, -1.0]] {
            FitzHughNagumo.diffusion(0.0, &x, &[1.0, 1.0, 0.1], 0, &mut g);
            assert_eq!(g, [0.0, 0.1]);
        }
    }
}
