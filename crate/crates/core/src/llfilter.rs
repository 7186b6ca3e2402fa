//! Continuous-discrete Local Linearization filter.
//!
//! Between observations the model is linearised once at the last filtered
//! mean, and the first two moments of the linearised SDE are propagated by
//! integrating
//!
//! ```text
//! dy/dt = A y + a(t)
//! dQ/dt = A Q + Q Aᵀ + Σᵢ [ Bᵢ (Q + y yᵀ) Bᵢᵀ + Bᵢ y bᵢ(t)ᵀ + bᵢ(t) yᵀ Bᵢᵀ + bᵢ(t) bᵢ(t)ᵀ ]
//! ```
//!
//! with classical RK4. At each observation the innovation and its covariance
//! are formed and a Kalman-type update is applied.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{
    diffusion_jacobian, drift_jacobian, linearize, EstimationProblem, LinearizationCoefficients,
    StateSpaceModel,
};

pub const DEFAULT_SUBSTEPS: usize = 64;


/// Upper bound for the stability-driven substep count of a single gap.
pub const MAX_SUBSTEPS: usize = 20_000;

/// `λ h` limit used when sizing RK4 steps; the real-axis stability boundary
/// of classical RK4 is about 2.785.
const RK4_STABLE_STEP: f64 = 2.5;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub t: f64,
    pub y: DVector<f64>,
    pub q: DMatrix<f64>,
}

pub fn symmetrize(q: &mut DMatrix<f64>) {
    let n = q.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
}

/// Flat row-major copy of the coefficients used inside the RK4 loop.
struct MomentOde {
    d: usize,
    a: Vec<f64>,
    a_const: Vec<f64>,
    a_slope: Vec<f64>,
    channels: Vec<Channel>,
}

struct Channel {
    /// False when `B_i` vanishes (additive noise).
    active: bool,
    b: Vec<f64>,
    b_const: Vec<f64>,
    b_slope: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    copy_row_major(m, &mut out);
    out
}

fn copy_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

fn norm_bound(m: &[f64], d: usize) -> f64 {
    let mut inf = 0.0f64;
    let mut one = 0.0f64;
    for i in 0..d {
        let mut r = 0.0;
        let mut c = 0.0;
        for j in 0..d {
            r += m[i * d + j].abs();
            c += m[j * d + i].abs();
        }
        inf = inf.max(r);
        one = one.max(c);
    }
    inf.min(one)
}

impl MomentOde {
    fn with_dims(d: usize, m: usize) -> Self {
        Self {
            d,
            a: vec![0.0; d * d],
            a_const: vec![0.0; d],
            a_slope: vec![0.0; d],
            channels: (0..m)
                .map(|_| Channel {
                    active: false,
                    b: vec![0.0; d * d],
                    b_const: vec![0.0; d],
                    b_slope: vec![0.0; d],
                })
                .collect(),
        }
    }

    fn new(c: &LinearizationCoefficients) -> Self {
        let mut ode = Self::with_dims(c.a.nrows(), c.b.len());
        copy_row_major(&c.a, &mut ode.a);
        ode.a_const.copy_from_slice(c.a_const.as_slice());
        ode.a_slope.copy_from_slice(c.a_slope.as_slice());
        for (ch, i) in ode.channels.iter_mut().zip(0..) {
            copy_row_major(&c.b[i], &mut ch.b);
            ch.active = c.b[i].amax() > 0.0;
            ch.b_const.copy_from_slice(c.b_const[i].as_slice());
            ch.b_slope.copy_from_slice(c.b_slope[i].as_slice());
        }
        ode
    }

    /// Linearises `model` at `(t, y)` in place and returns `|f(t, y)|∞`.
    /// Equivalent to [`linearize`] without the observation Jacobian.
    fn relinearize(
        &mut self,
        model: &dyn StateSpaceModel,
        t: f64,
        y: &[f64],
        alpha: &[f64],
        g: &mut [f64],
    ) -> Result<f64> {
        let d = self.d;
        if !model.jac_drift_into(t, y, alpha, &mut self.a) {
            copy_row_major(&drift_jacobian(model, t, y, alpha), &mut self.a);
        }
        model.drift(t, y, alpha, &mut self.a_const);
        let speed = self.a_const.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            let ay: f64 = (0..d).map(|j| self.a[i * d + j] * y[j]).sum();
            self.a_const[i] -= ay;
        }
        match model.time_deriv_drift(t, y, alpha) {
            Some(v) => self.a_slope.copy_from_slice(v.as_slice()),
            None => self.a_slope.fill(0.0),
        }
        for (i, ch) in self.channels.iter_mut().enumerate() {
            if !model.jac_diffusion_into(t, y, alpha, i, &mut ch.b) {
                copy_row_major(&diffusion_jacobian(model, t, y, alpha, i), &mut ch.b);
            }
            ch.active = ch.b.iter().any(|v| *v != 0.0);
            model.diffusion(t, y, alpha, i, g);
            for r in 0..d {
                let by: f64 = (0..d).map(|j| ch.b[r * d + j] * y[j]).sum();
                ch.b_const[r] = g[r] - by;
            }
            match model.time_deriv_diffusion(t, y, alpha, i) {
                Some(v) => ch.b_slope.copy_from_slice(v.as_slice()),
                None => ch.b_slope.fill(0.0),
            }
        }
        let finite = self.a.iter().chain(&self.a_const).chain(&self.a_slope).all(|v| v.is_finite())
            && self
                .channels
                .iter()
                .all(|c| c.b.iter().chain(&c.b_const).chain(&c.b_slope).all(|v| v.is_finite()));
        if !finite || !speed.is_finite() {
            return Err(Error::Evaluation { t, x: y.to_vec() });
        }
        Ok(speed)
    }

    fn stiffness_bound(&self) -> f64 {
        let d = self.d;
        2.0 * norm_bound(&self.a, d)
            + self
                .channels
                .iter()
                .filter(|c| c.active)
                .map(|c| norm_bound(&c.b, d).powi(2))
                .sum::<f64>()
    }

    /// Right-hand side at elapsed time `tau` for the packed state `[y, vec(Q)]`.
    ///
    /// The channel term is evaluated as `u uᵀ + B Q Bᵀ` with `u = B y + b(τ)`,
    /// which expands to the four terms of the moment equation.
    fn rhs(&self, tau: f64, s: &[f64], ds: &mut [f64], w: &mut Workspace) {
        match self.d {
            1 => self.rhs_fixed::<1>(tau, s, ds),
            2 => self.rhs_fixed::<2>(tau, s, ds),
            _ => self.rhs_dyn(tau, s, ds, w),
        }
    }

    /// [`Self::rhs`] on stack arrays for small state dimensions.
    fn rhs_fixed<const D: usize>(&self, tau: f64, s: &[f64], ds: &mut [f64]) {
        let load = |v: &[f64]| -> [[f64; D]; D] { std::array::from_fn(|i| std::array::from_fn(|j| v[i * D + j])) };
        let y: [f64; D] = std::array::from_fn(|i| s[i]);
        let q = load(&s[D..]);
        let a = load(&self.a);
        let mut dq = [[0.0; D]; D];
        for i in 0..D {
            let mut acc = self.a_const[i] + self.a_slope[i] * tau;
            for j in 0..D {
                acc += a[i][j] * y[j];
            }
            ds[i] = acc;
        }
        let mut aq = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    aq[i][j] += a[i][k] * q[k][j];
                }
            }
        }
        for i in 0..D {
            for j in 0..D {
                dq[i][j] = aq[i][j] + aq[j][i];
            }
        }
        for ch in &self.channels {
            let mut u: [f64; D] = std::array::from_fn(|i| ch.b_const[i] + ch.b_slope[i] * tau);
            if ch.active {
                let b = load(&ch.b);
                let mut bq = [[0.0; D]; D];
                for i in 0..D {
                    for k in 0..D {
                        u[i] += b[i][k] * y[k];
                        for j in 0..D {
                            bq[i][j] += b[i][k] * q[k][j];
                        }
                    }
                }
                for i in 0..D {
                    for j in 0..D {
                        for k in 0..D {
                            dq[i][j] += bq[i][k] * b[j][k];
                        }
                    }
                }
            }
            for i in 0..D {
                for j in 0..D {
                    dq[i][j] += u[i] * u[j];
                }
            }
        }
        for i in 0..D {
            for j in 0..D {
                ds[D + i * D + j] = dq[i][j];
            }
        }
    }

    fn rhs_dyn(&self, tau: f64, s: &[f64], ds: &mut [f64], w: &mut Workspace) {
        let d = self.d;
        let (y, q) = s.split_at(d);
        let (dy, dq) = ds.split_at_mut(d);
        let a = &self.a[..d * d];
        let q = &q[..d * d];
        let dq = &mut dq[..d * d];
        let m = &mut w.m[..d * d];

        for (i, (row, out)) in a.chunks_exact(d).zip(dy.iter_mut()).enumerate() {
            let ay: f64 = row.iter().zip(y).map(|(x, v)| x * v).sum();
            *out = ay + self.a_const[i] + self.a_slope[i] * tau;
        }

        // dQ = A Q + (A Q)ᵀ, Q symmetric
        for i in 0..d {
            let row = &a[i * d..(i + 1) * d];
            for j in 0..d {
                m[i * d + j] = (0..d).map(|k| row[k] * q[k * d + j]).sum();
            }
        }
        for i in 0..d {
            for j in 0..d {
                dq[i * d + j] = m[i * d + j] + m[j * d + i];
            }
        }

        let u = &mut w.u[..d];
        for ch in &self.channels {
            for i in 0..d {
                u[i] = ch.b_const[i] + ch.b_slope[i] * tau;
            }
            if ch.active {
                let b = &ch.b[..d * d];
                for (ui, row) in u.iter_mut().zip(b.chunks_exact(d)) {
                    *ui += row.iter().zip(y).map(|(x, v)| x * v).sum::<f64>();
                }
                // M = B Q, dQ += M Bᵀ
                for i in 0..d {
                    let row = &b[i * d..(i + 1) * d];
                    for j in 0..d {
                        m[i * d + j] = (0..d).map(|k| row[k] * q[k * d + j]).sum();
                    }
                }
                for i in 0..d {
                    let mi = &m[i * d..(i + 1) * d];
                    for j in 0..d {
                        let bj = &b[j * d..(j + 1) * d];
                        dq[i * d + j] += mi.iter().zip(bj).map(|(x, v)| x * v).sum::<f64>();
                    }
                }
            }
            for i in 0..d {
                for j in 0..d {
                    dq[i * d + j] += u[i] * u[j];
                }
            }
        }
    }
}

/// Scratch buffers for [`MomentOde::rhs`] and the RK4 stages.
struct Workspace {
    m: Vec<f64>,
    u: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        let n = d + d * d;
        Self {
            m: vec![0.0; d * d],
            u: vec![0.0; d],
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

/// One classical RK4 step of length `h` starting at elapsed time `tau`,
/// followed by symmetrization of the packed covariance.
fn rk4_step(ode: &MomentOde, tau: f64, h: f64, s: &mut [f64], w: &mut Workspace) -> bool {
    let d = ode.d;
    let n = s.len();
    let mut k = std::mem::take(&mut w.k);
    let mut tmp = std::mem::take(&mut w.tmp);
    ode.rhs(tau, s, &mut k[0], w);
    for i in 0..n {
        tmp[i] = s[i] + 0.5 * h * k[0][i];
    }
    ode.rhs(tau + 0.5 * h, &tmp, &mut k[1], w);
    for i in 0..n {
        tmp[i] = s[i] + 0.5 * h * k[1][i];
    }
    ode.rhs(tau + 0.5 * h, &tmp, &mut k[2], w);
    for i in 0..n {
        tmp[i] = s[i] + h * k[2][i];
    }
    ode.rhs(tau + h, &tmp, &mut k[3], w);
    for i in 0..n {
        s[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    w.k = k;
    w.tmp = tmp;
    let q = &mut s[d..];
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (q[i * d + j] + q[j * d + i]);
            q[i * d + j] = v;
            q[j * d + i] = v;
        }
    }
    s.iter().all(|v| v.is_finite())
}

/// Spectral bound on the moment ODE used to size stable RK4 steps:
/// `2 ρ(A) + Σᵢ ρ(Bᵢ)²`, with `ρ` bounded by the smaller of the 1- and ∞-norms.
pub fn stiffness_bound(c: &LinearizationCoefficients) -> f64 {
    MomentOde::new(c).stiffness_bound()
}

/// Substep count for one gap: the configured value, raised where needed so
/// that every RK4 step stays inside the stability region.
pub fn effective_substeps(c: &LinearizationCoefficients, dt: f64, substeps: usize) -> usize {
    let needed = (dt * stiffness_bound(c) / RK4_STABLE_STEP).ceil();
    if needed.is_finite() && needed > substeps as f64 {
        (needed as usize).min(MAX_SUBSTEPS)
    } else {
        substeps.max(1)
    }
}

/// Propagates mean and covariance over `[state.t, state.t + dt]` with
/// `substeps` equal RK4 steps. Time-dependent coefficient terms are measured
/// from `state.t`.
pub fn predict(
    state: &FilterState,
    coeffs: &LinearizationCoefficients,
    dt: f64,
    substeps: usize,
) -> Result<FilterState> {
    if !(dt >= 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter(format!(
            "predict needs dt >= 0 and substeps >= 1 (dt = {dt}, substeps = {substeps})"
        )));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let ode = MomentOde::new(coeffs);
    let d = ode.d;
    let mut w = Workspace::new(d);
    let mut s = pack(state);
    let h = dt / substeps as f64;
    for step in 0..substeps {
        if !rk4_step(&ode, step as f64 * h, h, &mut s, &mut w) {
            return Err(Error::PredictionDivergence { substep: step + 1 });
        }
    }

    Ok(unpack(state.t + dt, d, &s))
}

fn pack(state: &FilterState) -> Vec<f64> {
    let mut s = Vec::with_capacity(state.y.len() * (1 + state.y.len()));
    s.extend_from_slice(state.y.as_slice());
    s.extend_from_slice(&row_major(&state.q));
    s
}

fn unpack(t: f64, d: usize, s: &[f64]) -> FilterState {
    FilterState {
        t,
        y: DVector::from_column_slice(&s[..d]),
        q: DMatrix::from_row_slice(d, d, &s[d..]),
    }
}

/// Innovation `ν = z − h0(t, y)` and its covariance `C Q Cᵀ + Σ`.
#[derive(Clone, Debug)]
pub struct Innovation {
    pub nu: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Innovation {
    /// `ln det Σν` from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `νᵀ Σν⁻¹ ν` via a triangular solve.
    pub fn mahalanobis(&self) -> f64 {
        let l = self.chol.l();
        let v = l
            .solve_lower_triangular(&self.nu)
            .expect("Cholesky factor has a positive diagonal");
        v.norm_squared()
    }

    /// Contribution `r ln 2π + ln det Σν + νᵀ Σν⁻¹ ν` to the fitness.
    pub fn fitness_term(&self) -> f64 {
        self.nu.len() as f64 * LN_2PI + self.log_det() + self.mahalanobis()
    }
}

fn factorize(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)
}

pub fn innovate(
    pred: &FilterState,
    model: &dyn StateSpaceModel,
    coeffs: &LinearizationCoefficients,
    z: &DVector<f64>,
) -> Result<Innovation> {
    let mut h = DVector::zeros(model.obs_dim());
    model.obs_mean(pred.t, pred.y.as_slice(), h.as_mut_slice());
    let nu = z - h;
    let mut cov = &coeffs.c * &pred.q * coeffs.c.transpose() + model.obs_noise_cov();
    symmetrize(&mut cov);
    let chol = factorize(&cov)?;
    Ok(Innovation { nu, cov, chol })
}

/// Measurement update with gain `K = Q Cᵀ Σν⁻¹`, obtained from a Cholesky
/// solve rather than an explicit inverse.
pub fn update(
    pred: &FilterState,
    coeffs: &LinearizationCoefficients,
    nu: &DVector<f64>,
    innovation_cov: &DMatrix<f64>,
) -> Result<FilterState> {
    let chol = factorize(innovation_cov)?;
    update_with(pred, coeffs, nu, &chol)
}

fn update_with(
    pred: &FilterState,
    coeffs: &LinearizationCoefficients,
    nu: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
) -> Result<FilterState> {
    let cq = &coeffs.c * &pred.q;
    // Σν Kᵀ = C Q
    let kt = chol.solve(&cq);
    let k = kt.transpose();
    let y = &pred.y + &k * nu;
    let mut q = &pred.q - &k * &cq;
    symmetrize(&mut q);
    Ok(FilterState { t: pred.t, y, q })
}

#[derive(Clone, Debug, PartialEq)]
pub enum FilterStatus {
    Ok,
    Penalized { reason: String, step: usize },
}

/// Output of one filter pass. Entry `k` of each sequence belongs to the
/// observation at `times[k]`, i.e. `t_{k+1}` of the series.
#[derive(Clone, Debug)]
pub struct FilterRun {
    pub times: Vec<f64>,
    pub innovations: Vec<DVector<f64>>,
    pub innovation_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// Sum of the fitness terms accumulated so far.
    pub fitness: f64,
    pub status: FilterStatus,
}

impl FilterRun {
    pub fn is_ok(&self) -> bool {
        self.status == FilterStatus::Ok
    }

    pub fn len(&self) -> usize {
        self.innovations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.innovations.is_empty()
    }
}

/// Prediction settings for [`run_filter_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterOptions {
    /// RK4 steps per observation gap; with re-linearization this is the
    /// minimum, shorter steps are taken where the dynamics demand it.
    pub substeps: usize,
    /// Re-linearise at the predicted mean before every RK4 step instead of
    /// freezing the coefficients at the filtered mean for the whole gap.
    pub relinearize: bool,
    /// Largest change of any mean component allowed within one step when
    /// re-linearising, measured by `h |f(y)|∞`.
    pub max_displacement: f64,
}

pub const DEFAULT_MAX_DISPLACEMENT: f64 = 0.02;

impl FilterOptions {
    pub fn new(substeps: usize) -> Self {
        Self {
            substeps,
            relinearize: true,
            max_displacement: DEFAULT_MAX_DISPLACEMENT,
        }
    }

    /// One linearization per gap at the filtered mean.
    pub fn frozen(substeps: usize) -> Self {
        Self {
            relinearize: false,
            ..Self::new(substeps)
        }
    }
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self::new(DEFAULT_SUBSTEPS)
    }
}

/// Prediction from `state` to `t_next`. Returns the prediction and the
/// coefficients taken at `state`.
fn predict_gap(
    model: &dyn StateSpaceModel,
    state: &FilterState,
    t_next: f64,
    alpha: &[f64],
    opts: &FilterOptions,
) -> Result<(FilterState, LinearizationCoefficients)> {
    let dt = t_next - state.t;
    let first = linearize(model, state.t, state.y.as_slice(), alpha)?;
    if !opts.relinearize {
        let n = effective_substeps(&first, dt, opts.substeps);
        let mut pred = predict(state, &first, dt, n)?;
        pred.t = t_next;
        return Ok((pred, first));
    }

    let h_max = dt / opts.substeps.max(1) as f64;
    let h_min = dt / MAX_SUBSTEPS as f64;
    let d = state.y.len();
    let mut ode = MomentOde::new(&first);
    let mut w = Workspace::new(d);
    let mut g = vec![0.0; d];
    let mut s = pack(state);
    let mut speed = first.a_const.iter().zip(&(&first.a * &state.y)).fold(0.0f64, |m, (c, ay)| m.max((c + ay).abs()));
    let mut elapsed = 0.0;
    let mut steps = 0;
    while dt - elapsed > 1e-12 * dt.max(1.0) {
        if steps > 0 {
            speed = ode.relinearize(model, state.t + elapsed, &s[..d], alpha, &mut g)?;
        }
        let mut h = h_max.min(RK4_STABLE_STEP / ode.stiffness_bound());
        if speed > 0.0 {
            h = h.min(opts.max_displacement / speed);
        }
        let h = h.max(h_min).min(dt - elapsed);
        steps += 1;
        if !rk4_step(&ode, 0.0, h, &mut s, &mut w) || steps > MAX_SUBSTEPS {
            return Err(Error::PredictionDivergence { substep: steps });
        }
        elapsed += h;
    }
    Ok((unpack(t_next, d, &s), first))
}

/// [`run_filter_with`] with re-linearization and the default displacement limit.
pub fn run_filter(problem: &EstimationProblem, alpha: &[f64], substeps: usize) -> FilterRun {
    run_filter_with(problem, alpha, &FilterOptions::new(substeps))
}

/// Runs the filter over every observation gap of `problem` at parameter `alpha`.
/// Failures are not returned as errors; they end the run with a
/// [`FilterStatus::Penalized`] status and whatever was computed up to that point.
pub fn run_filter_with(problem: &EstimationProblem, alpha: &[f64], opts: &FilterOptions) -> FilterRun {
    let model = problem.model.as_ref();
    let obs = &problem.observations;
    let n = obs.len().saturating_sub(1);
    let mut run = FilterRun {
        times: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        innovation_covs: Vec::with_capacity(n),
        filtered_means: Vec::with_capacity(n),
        filtered_covs: Vec::with_capacity(n),
        fitness: 0.0,
        status: FilterStatus::Ok,
    };
    if obs.is_empty() {
        return run;
    }

    let mut state = FilterState {
        t: obs.times[0],
        y: problem.y0.clone(),
        q: problem.q0.clone(),
    };

    let penalize = |run: &mut FilterRun, err: Error, step: usize| {
        run.status = FilterStatus::Penalized {
            reason: err.to_string(),
            step,
        };
    };

    if problem.initial_update {
        let res = linearize(model, state.t, state.y.as_slice(), alpha).and_then(|c| {
            let inn = innovate(&state, model, &c, &obs.values[0])?;
            update_with(&state, &c, &inn.nu, &inn.chol)
        });
        match res {
            Ok(s) => state = s,
            Err(e) => {
                penalize(&mut run, e, 0);
                return run;
            }
        }
    }

    for k in 0..n {
        let step = || -> Result<(FilterState, Innovation)> {
            let (pred, coeffs) = predict_gap(model, &state, obs.times[k + 1], alpha, opts)?;
            let inn = innovate(&pred, model, &coeffs, &obs.values[k + 1])?;
            let post = update_with(&pred, &coeffs, &inn.nu, &inn.chol)?;
            Ok((post, inn))
        };
        match step() {
            Ok((post, inn)) => {
                let term = inn.fitness_term();
                if !term.is_finite() {
                    penalize(&mut run, Error::NotPositiveDefinite, k + 1);
                    return run;
                }
                run.fitness += term;
                run.times.push(post.t);
                run.innovations.push(inn.nu);
                run.innovation_covs.push(inn.cov);
                run.filtered_means.push(post.y.clone());
                run.filtered_covs.push(post.q.clone());
                state = post;
            }
            Err(e) => {
                penalize(&mut run, e, k + 1);
                return run;
            }
        }
    }
    run
}
