//! Continuous-discrete state-space models.
//!
//! A model pairs an Itô SDE
//!
//! ```text
//! dx = f(t, x; α) dt + Σᵢ gᵢ(t, x; α) dwᵢ
//! ```
//!
//! with a discrete observation map `z_k = h0(t_k, x(t_k)) + e_k`, `e_k ~ N(0, Σ)`.
//! Implementors of [`StateSpaceModel`] write into caller-owned buffers so the
//! simulators can run without allocating per step.

mod fhn;
mod linear;
mod multiplicative;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::simulate::ObservationSeries;

pub use fhn::FitzHughNagumo;
pub use linear::{LinearModel, OrnsteinUhlenbeck};
pub use multiplicative::MultiplicativeNoise;

pub trait StateSpaceModel: Send + Sync {
    fn name(&self) -> &str;

    /// `d`
    fn state_dim(&self) -> usize;
    /// `m`, the number of Wiener channels.
    fn noise_dim(&self) -> usize;
    /// `r`
    fn obs_dim(&self) -> usize;
    /// `p`
    fn param_count(&self) -> usize;

    fn drift(&self, t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]);

    /// Column `channel` of the diffusion, i.e. `g_channel(t, x; α)`.
    fn diffusion(&self, t: f64, x: &[f64], alpha: &[f64], channel: usize, out: &mut [f64]);

    fn obs_mean(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Observation noise covariance `Σ` (r × r).
    fn obs_noise_cov(&self) -> DMatrix<f64>;

    fn jac_drift(&self, _t: f64, _x: &[f64], _alpha: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn jac_diffusion(
        &self,
        _t: f64,
        _x: &[f64],
        _alpha: &[f64],
        _channel: usize,
    ) -> Option<DMatrix<f64>> {
        None
    }

    fn jac_obs(&self, _t: f64, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Writes `J_f` row-major into `out` without allocating. Returns `false`
    /// when there is no analytic Jacobian.
    fn jac_drift_into(&self, t: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) -> bool {
        match self.jac_drift(t, x, alpha) {
            Some(j) => {
                fill_row_major(&j, out);
                true
            }
            None => false,
        }
    }

    /// Row-major `J_{g_channel}`, see [`StateSpaceModel::jac_drift_into`].
    fn jac_diffusion_into(
        &self,
        t: f64,
        x: &[f64],
        alpha: &[f64],
        channel: usize,
        out: &mut [f64],
    ) -> bool {
        match self.jac_diffusion(t, x, alpha, channel) {
            Some(j) => {
                fill_row_major(&j, out);
                true
            }
            None => false,
        }
    }

    /// `∂f/∂t`; `None` means zero.
    fn time_deriv_drift(&self, _t: f64, _x: &[f64], _alpha: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// `∂g_channel/∂t`; `None` means zero.
    fn time_deriv_diffusion(
        &self,
        _t: f64,
        _x: &[f64],
        _alpha: &[f64],
        _channel: usize,
    ) -> Option<DVector<f64>> {
        None
    }

    /// Variances of the auxiliary noise `ξ` used only when generating data.
    /// `None` when the model has no term beyond `h0 + e`.
    fn extra_obs_noise_var(&self) -> Option<DVector<f64>> {
        None
    }

    /// Adds the state-dependent observation noise term for a draw `xi` into `out`.
    fn extra_obs_noise(&self, _t: f64, _x: &[f64], _xi: &[f64], _out: &mut [f64]) {}
}

fn fill_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

pub type SharedModel = Arc<dyn StateSpaceModel>;

/// Looks up one of the built-in models by its CLI name.
pub fn builtin(name: &str) -> Result<SharedModel> {
    match name {
        "fhn" => Ok(Arc::new(FitzHughNagumo)),
        "mult" => Ok(Arc::new(MultiplicativeNoise)),
        other => Err(Error::Config(format!("unknown model `{other}`"))),
    }
}

/// Jacobians of the drift, each diffusion channel and the observation map.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobians {
    pub drift: DMatrix<f64>,
    pub diffusion: Vec<DMatrix<f64>>,
    pub obs: DMatrix<f64>,
}

/// Central-difference step for coordinate value `xj`.
pub fn fd_step(xj: f64) -> f64 {
    (1e-6 * xj.abs()).max(1e-6)
}

fn fd_jacobian<F>(x: &[f64], rows: usize, mut eval: F) -> DMatrix<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut jac = DMatrix::zeros(rows, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; rows];
    let mut fm = vec![0.0; rows];
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        eval(&xp, &mut fp);
        xp[j] = x[j] - h;
        eval(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn finite_difference_jacobians(
    model: &dyn StateSpaceModel,
    t: f64,
    x: &[f64],
    alpha: &[f64],
) -> Jacobians {
    let d = model.state_dim();
    let drift = fd_jacobian(x, d, |xx, out| model.drift(t, xx, alpha, out));
    let diffusion = (0..model.noise_dim())
        .map(|i| fd_jacobian(x, d, |xx, out| model.diffusion(t, xx, alpha, i, out)))
        .collect();
    let obs = fd_jacobian(x, model.obs_dim(), |xx, out| model.obs_mean(t, xx, out));
    Jacobians {
        drift,
        diffusion,
        obs,
    }
}

/// `J_f` at `(t, x)`, analytic where the model provides it.
pub fn drift_jacobian(model: &dyn StateSpaceModel, t: f64, x: &[f64], alpha: &[f64]) -> DMatrix<f64> {
    model
        .jac_drift(t, x, alpha)
        .unwrap_or_else(|| fd_jacobian(x, model.state_dim(), |xx, out| model.drift(t, xx, alpha, out)))
}

/// `J_{g_i}` at `(t, x)`, analytic where the model provides it.
pub fn diffusion_jacobian(
    model: &dyn StateSpaceModel,
    t: f64,
    x: &[f64],
    alpha: &[f64],
    channel: usize,
) -> DMatrix<f64> {
    model.jac_diffusion(t, x, alpha, channel).unwrap_or_else(|| {
        fd_jacobian(x, model.state_dim(), |xx, out| {
            model.diffusion(t, xx, alpha, channel, out)
        })
    })
}

/// Analytic Jacobians where the model provides them, finite differences otherwise.
pub fn jacobians(model: &dyn StateSpaceModel, t: f64, x: &[f64], alpha: &[f64]) -> Jacobians {
    let diffusion = (0..model.noise_dim())
        .map(|i| diffusion_jacobian(model, t, x, alpha, i))
        .collect();
    let obs = model
        .jac_obs(t, x)
        .unwrap_or_else(|| fd_jacobian(x, model.obs_dim(), |xx, out| model.obs_mean(t, xx, out)));
    Jacobians {
        drift: drift_jacobian(model, t, x, alpha),
        diffusion,
        obs,
    }
}

/// Coefficients of the model linearised at `(t_k, y_k)`:
///
/// ```text
/// f(t, x) ≈ A x + a_const + a_slope (t − t_k)
/// g_i(t, x) ≈ B_i x + b_const_i + b_slope_i (t − t_k)
/// h0(x) ≈ h0(y_k) + C (x − y_k)
/// ```
#[derive(Clone, Debug)]
pub struct LinearizationCoefficients {
    pub a: DMatrix<f64>,
    pub b: Vec<DMatrix<f64>>,
    pub c: DMatrix<f64>,
    pub a_const: DVector<f64>,
    pub a_slope: DVector<f64>,
    pub b_const: Vec<DVector<f64>>,
    pub b_slope: Vec<DVector<f64>>,
}

impl LinearizationCoefficients {
    pub fn is_finite(&self) -> bool {
        let m = |v: &DMatrix<f64>| v.iter().all(|x| x.is_finite());
        let v = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        m(&self.a)
            && m(&self.c)
            && self.b.iter().all(m)
            && v(&self.a_const)
            && v(&self.a_slope)
            && self.b_const.iter().all(v)
            && self.b_slope.iter().all(v)
    }
}

pub fn linearize(
    model: &dyn StateSpaceModel,
    t: f64,
    x: &[f64],
    alpha: &[f64],
) -> Result<LinearizationCoefficients> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let jac = jacobians(model, t, x, alpha);
    let xv = DVector::from_column_slice(x);

    let mut f = DVector::zeros(d);
    model.drift(t, x, alpha, f.as_mut_slice());
    let a_const = &f - &jac.drift * &xv;
    let a_slope = model
        .time_deriv_drift(t, x, alpha)
        .unwrap_or_else(|| DVector::zeros(d));

    let mut b_const = Vec::with_capacity(m);
    let mut b_slope = Vec::with_capacity(m);
    let mut g = DVector::zeros(d);
    for i in 0..m {
        model.diffusion(t, x, alpha, i, g.as_mut_slice());
        b_const.push(&g - &jac.diffusion[i] * &xv);
        b_slope.push(
            model
                .time_deriv_diffusion(t, x, alpha, i)
                .unwrap_or_else(|| DVector::zeros(d)),
        );
    }

    let coeffs = LinearizationCoefficients {
        a: jac.drift,
        b: jac.diffusion,
        c: jac.obs,
        a_const,
        a_slope,
        b_const,
        b_slope,
    };
    if !coeffs.is_finite() {
        return Err(Error::Evaluation { t, x: x.to_vec() });
    }
    Ok(coeffs)
}

/// Search intervals `[lo_i, hi_i]` for the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
    names: Vec<String>,
    true_values: Option<Vec<f64>>,
}

impl ParameterBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidParameter(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l <= h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidInterval { lo: l, hi: h });
            }
        }
        let names = (1..=lo.len()).map(|i| format!("alpha_{i}")).collect();
        Ok(Self {
            lo,
            hi,
            names,
            true_values: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidParameter("wrong number of names".into()));
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_true_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.dim() {
            return Err(Error::InvalidParameter("wrong number of true values".into()));
        }
        self.true_values = Some(values);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn true_values(&self) -> Option<&[f64]> {
        self.true_values.as_deref()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

/// Everything the innovation fitness needs: model, data, search box and the
/// filter's initial moments.
#[derive(Clone)]
pub struct EstimationProblem {
    pub model: SharedModel,
    pub observations: ObservationSeries,
    pub param_box: ParameterBox,
    pub y0: DVector<f64>,
    pub q0: DMatrix<f64>,
    /// Assimilate `z_{t0}` before the first prediction.
    pub initial_update: bool,
}

impl EstimationProblem {
    pub fn new(
        model: SharedModel,
        observations: ObservationSeries,
        param_box: ParameterBox,
        y0: DVector<f64>,
        q0: DMatrix<f64>,
    ) -> Result<Self> {
        let d = model.state_dim();
        if y0.len() != d || q0.nrows() != d || q0.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "initial moments do not match state dimension {d}"
            )));
        }
        if param_box.dim() != model.param_count() {
            return Err(Error::InvalidParameter(format!(
                "box has {} parameters, model `{}` has {}",
                param_box.dim(),
                model.name(),
                model.param_count()
            )));
        }
        if observations.values.iter().any(|z| z.len() != model.obs_dim()) {
            return Err(Error::InvalidParameter(
                "observation dimension does not match model".into(),
            ));
        }
        let asym = (&q0 - q0.transpose()).amax();
        if asym > 1e-12 * (1.0 + q0.amax()) {
            return Err(Error::InvalidParameter("Q0 is not symmetric".into()));
        }
        let min_eig = q0.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * (1.0 + q0.amax()) {
            return Err(Error::InvalidParameter("Q0 is not positive semidefinite".into()));
        }
        Ok(Self {
            model,
            observations,
            param_box,
            y0,
            q0,
            initial_update: false,
        })
    }
}
