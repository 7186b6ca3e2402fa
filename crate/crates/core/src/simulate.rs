//! Synthetic data: Euler–Maruyama paths on a fine grid, subsampled at the
//! observation instants and pushed through the observation equation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::rng::RngStream;

/// Any state component beyond this magnitude is treated as a blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// States on the fine grid `t_j = t0 + j h`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.h
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    pub true_states: Option<Vec<DVector<f64>>>,
}

impl ObservationSeries {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} observations",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "observation times must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter("non-finite observation".into()));
        }
        Ok(Self {
            times,
            values,
            true_states: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Euler–Maruyama on `n_steps` steps of size `h`:
/// `x_{j+1} = x_j + f(t_j, x_j) h + Σᵢ gᵢ(t_j, x_j) √h η_ij`.
///
/// Increments are drawn step-major, channel-minor from `rng`.
pub fn simulate_path(
    model: &dyn StateSpaceModel,
    alpha: &[f64],
    x0: &[f64],
    t0: f64,
    h: f64,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let d = model.state_dim();
    if !(h > 0.0) || n_steps < 1 {
        return Err(Error::InvalidParameter(format!(
            "need h > 0 and n_steps >= 1, got h = {h}, n_steps = {n_steps}"
        )));
    }
    if x0.len() != d || alpha.len() != model.param_count() {
        return Err(Error::InvalidParameter("x0 or alpha has the wrong length".into()));
    }
    let m = model.noise_dim();
    let sqrt_h = h.sqrt();
    let mut data = Vec::with_capacity((n_steps + 1) * d);
    data.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    for j in 0..n_steps {
        let t = t0 + j as f64 * h;
        model.drift(t, &x, alpha, &mut f);
        let mut next: Vec<f64> = x.iter().zip(&f).map(|(xi, fi)| xi + fi * h).collect();
        for i in 0..m {
            model.diffusion(t, &x, alpha, i, &mut g);
            let dw = sqrt_h * rng.standard_normal();
            for (n, gi) in next.iter_mut().zip(&g) {
                *n += gi * dw;
            }
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Divergence { step: j + 1 });
        }
        data.extend_from_slice(&next);
        x = next;
    }
    Ok(Trajectory {
        t0,
        h,
        dim: d,
        data,
    })
}

/// Fine-grid stride for an observation interval `delta`.
pub fn grid_stride(h: f64, delta: f64) -> Result<usize> {
    let ratio = delta / h;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch { delta, h });
    }
    Ok(k as usize)
}

/// States at `t_k = t0 + k Δ`, `k = 0..=n`, with their times.
pub fn subsample(traj: &Trajectory, delta: f64, n: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let stride = grid_stride(traj.h, delta)?;
    let needed = n * stride;
    if needed >= traj.len() {
        return Err(Error::Range {
            needed,
            available: traj.len(),
        });
    }
    let times = (0..=n).map(|k| traj.t0 + k as f64 * delta).collect();
    let states = (0..=n)
        .map(|k| DVector::from_column_slice(traj.state(k * stride)))
        .collect();
    Ok((times, states))
}

/// Square root `L` with `L Lᵀ = cov` for a symmetric PSD matrix.
pub(crate) fn psd_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = cov.clone().cholesky() {
        return ch.l();
    }
    let eig = cov.clone().symmetric_eigen();
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * scale
}

/// `z_k = h0(t_k, x_k) [+ extra(t_k, x_k, ξ_k)] + e_k`.
///
/// Per observation, `ξ_k` components are drawn first, then `e_k`.
pub fn generate_observations(
    model: &dyn StateSpaceModel,
    states: &[DVector<f64>],
    times: &[f64],
    rng: &mut RngStream,
) -> Result<ObservationSeries> {
    if states.len() != times.len() {
        return Err(Error::InvalidParameter("states and times differ in length".into()));
    }
    let r = model.obs_dim();
    let noise_sqrt = psd_sqrt(&model.obs_noise_cov());
    let extra = model.extra_obs_noise_var();
    let mut values = Vec::with_capacity(states.len());
    let mut z = vec![0.0; r];
    for (x, &t) in states.iter().zip(times) {
        model.obs_mean(t, x.as_slice(), &mut z);
        if let Some(var) = &extra {
            let xi: Vec<f64> = var.iter().map(|v| v.sqrt() * rng.standard_normal()).collect();
            model.extra_obs_noise(t, x.as_slice(), &xi, &mut z);
        }
        let eta = DVector::from_fn(r, |_, _| rng.standard_normal());
        let e = &noise_sqrt * eta;
        values.push(DVector::from_fn(r, |i, _| z[i] + e[i]));
    }
    let mut series = ObservationSeries::new(times.to_vec(), values)?;
    series.true_states = Some(states.to_vec());
    Ok(series)
}

/// Observation-grid settings for [`simulate_observations`].
#[derive(Clone, Debug)]
pub struct SimulationSettings {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub h: f64,
    pub delta: f64,
    pub n_obs: usize,
}

/// Path, subsampling and observation noise in one go. The path uses
/// `rng.split(0)` and the observation noise `rng.split(1)`.
pub fn simulate_observations(
    model: &dyn StateSpaceModel,
    alpha: &[f64],
    settings: &SimulationSettings,
    rng: &RngStream,
) -> Result<(Trajectory, ObservationSeries)> {
    let stride = grid_stride(settings.h, settings.delta)?;
    let n_steps = (settings.n_obs * stride).max(1);
    let mut path_rng = rng.split(0);
    let traj = simulate_path(
        model,
        alpha,
        &settings.x0,
        settings.t0,
        settings.h,
        n_steps,
        &mut path_rng,
    )?;
    let (times, states) = subsample(&traj, settings.delta, settings.n_obs)?;
    let mut obs_rng = rng.split(1);
    let obs = generate_observations(model, &states, &times, &mut obs_rng)?;
    Ok((traj, obs))
}
