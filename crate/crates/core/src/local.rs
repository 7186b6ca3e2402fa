//! Box-constrained Nelder–Mead and its compositions with UMDAc: local search
//! from a random start, and UMDAc followed by local refinement.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::ParameterBox;
use crate::objective::{Objective, PENALTY};
use crate::rng::RngStream;
use crate::umdac::{umdac_minimize, EstimationResult, UmdacConfig};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Initial simplex edge as a fraction of each box width.
const SIMPLEX_EDGE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalConfig {
    pub max_iters: usize,
    /// Simplex diameter (∞-norm) tolerance.
    pub x_tol: f64,
    /// Tolerance on the spread of vertex fitness values.
    pub f_tol: f64,
    pub substeps: usize,
}

impl LocalConfig {
    pub fn for_box(bx: &ParameterBox) -> Self {
        Self {
            max_iters: 400 * bx.dim().max(1),
            x_tol: 1e-6 * bx.max_width().max(f64::MIN_POSITIVE),
            f_tol: 1e-8,
            substeps: crate::llfilter::DEFAULT_SUBSTEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 || !(self.x_tol > 0.0) || !(self.f_tol > 0.0) || self.substeps < 1 {
            return Err(Error::InvalidParameter(format!("local config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct LocalResult {
    pub result: EstimationResult,
    pub start_fitness: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

struct Simplex<'a, O: ?Sized> {
    objective: &'a O,
    bx: &'a ParameterBox,
    evaluations: usize,
}

impl<O: Objective + ?Sized> Simplex<'_, O> {
    fn eval(&mut self, x: &[f64]) -> (f64, bool) {
        self.evaluations += 1;
        let e = self.objective.evaluate(x);
        (e.value, e.penalized)
    }

    /// `c + coef (c − w)`, projected onto the box.
    fn trial(&self, centroid: &[f64], worst: &[f64], coef: f64) -> Vec<f64> {
        let mut x: Vec<f64> = centroid
            .iter()
            .zip(worst)
            .map(|(c, w)| c + coef * (c - w))
            .collect();
        self.bx.clamp(&mut x);
        x
    }
}

/// `x` plus one vertex per coordinate, stepped 5 % of the box width inward.
fn initial_simplex(x: &[f64], bx: &ParameterBox) -> Vec<Vec<f64>> {
    let mut verts = vec![x.to_vec()];
    for i in 0..x.len() {
        let mut v = x.to_vec();
        let step = SIMPLEX_EDGE * bx.width(i);
        v[i] = if v[i] + step <= bx.hi()[i] { v[i] + step } else { v[i] - step };
        verts.push(v);
    }
    verts
}

/// Nelder–Mead from `x0` with every trial point projected onto the box.
///
/// A cycle ends when both the simplex diameter is below `x_tol` and the
/// fitness spread is below `f_tol`. If the cycle lowered the best value by
/// more than `f_tol`, the simplex is rebuilt around the best vertex and a new
/// cycle starts; otherwise the run stops. `max_iters` bounds the total. A run is
/// reported as converged only if it stopped on tolerance, its best value is
/// not the penalty and it did not end above its own starting fitness.
pub fn local_minimize<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    bx: &ParameterBox,
    cfg: &LocalConfig,
) -> Result<LocalResult> {
    cfg.validate()?;
    if !bx.contains(x0) {
        return Err(Error::Contract(format!("start point {x0:?} is outside the box")));
    }
    let start = Instant::now();
    let n = x0.len();
    let mut sx = Simplex {
        objective,
        bx,
        evaluations: 0,
    };

    let mut verts = initial_simplex(x0, bx);
    let mut vals: Vec<(f64, bool)> = verts.iter().map(|v| sx.eval(v)).collect();
    let start_fitness = vals[0].0;
    let mut cycle_start = start_fitness;

    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].0.total_cmp(&vals[b].0).then(a.cmp(&b)));
        verts = order.iter().map(|&i| verts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = verts[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = vals[n].0 - vals[0].0;
        if diameter <= cfg.x_tol && spread <= cfg.f_tol {
            // A simplex pressed flat against a face can stall; restart around
            // the best vertex until a cycle brings no further decrease.
            if cycle_start - vals[0].0 > cfg.f_tol && iterations < cfg.max_iters {
                cycle_start = vals[0].0;
                let fresh = initial_simplex(&verts[0], bx);
                for i in 1..=n {
                    vals[i] = sx.eval(&fresh[i]);
                }
                verts = fresh;
                continue;
            }
            stop = StopReason::Tolerance;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &verts[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = verts[n].clone();
        let xr = sx.trial(&centroid, &worst, REFLECT);
        let fr = sx.eval(&xr);

        if fr.0 < vals[0].0 {
            let xe = sx.trial(&centroid, &worst, EXPAND * REFLECT);
            let fe = sx.eval(&xe);
            if fe.0 < fr.0 {
                verts[n] = xe;
                vals[n] = fe;
            } else {
                verts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr.0 < vals[n - 1].0 {
            verts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr.0 < vals[n].0 {
            let xc = sx.trial(&centroid, &worst, CONTRACT * REFLECT);
            let fc = sx.eval(&xc);
            let ok = fc.0 <= fr.0;
            (xc, fc, ok)
        } else {
            let xc = sx.trial(&centroid, &worst, -CONTRACT);
            let fc = sx.eval(&xc);
            let ok = fc.0 < vals[n].0;
            (xc, fc, ok)
        };
        if accept {
            verts[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = verts[0].clone();
        for i in 1..=n {
            let mut v: Vec<f64> = best
                .iter()
                .zip(&verts[i])
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            bx.clamp(&mut v);
            vals[i] = sx.eval(&v);
            verts[i] = v;
        }
    }

    let (best_value, best_penalized) = vals[0];
    let converged = stop == StopReason::Tolerance
        && !best_penalized
        && best_value < PENALTY
        && best_value <= start_fitness;
    Ok(LocalResult {
        result: EstimationResult {
            alpha_hat: verts[0].clone(),
            fitness: best_value,
            penalized: best_penalized,
            converged,
            trace: Vec::new(),
            evaluations: sx.evaluations,
            wall_time: start.elapsed().as_secs_f64(),
        },
        start_fitness,
        iterations,
        stop,
    })
}

/// Local search from a start point drawn uniformly in the box.
pub fn loa_estimate<O: Objective + ?Sized>(
    objective: &O,
    bx: &ParameterBox,
    cfg: &LocalConfig,
    rng: &mut RngStream,
) -> Result<LocalResult> {
    let x0: Vec<f64> = (0..bx.dim())
        .map(|i| rng.uniform(bx.lo()[i], bx.hi()[i]))
        .collect::<Result<_>>()?;
    local_minimize(objective, &x0, bx, cfg)
}

#[derive(Clone, Debug)]
pub struct RefinedResult {
    /// The UMDAc stage on its own.
    pub eda: EstimationResult,
    /// The local stage started from the UMDAc estimate.
    pub local: LocalResult,
    /// Whichever of the two has the lower fitness.
    pub best: EstimationResult,
}

/// UMDAc followed by Nelder–Mead from its estimate. The returned `best` is
/// never worse than the UMDAc result.
pub fn refined_estimate<O: Objective + ?Sized>(
    objective: &O,
    bx: &ParameterBox,
    ucfg: &UmdacConfig,
    lcfg: &LocalConfig,
    rng: &mut RngStream,
) -> Result<RefinedResult> {
    let eda = umdac_minimize(objective, bx, ucfg, rng)?;
    let local = local_minimize(objective, &eda.alpha_hat, bx, lcfg)?;
    let mut best = if local.result.fitness < eda.fitness {
        let mut r = local.result.clone();
        r.trace = eda.trace.clone();
        r.converged = !r.penalized;
        r
    } else {
        eda.clone()
    };
    best.evaluations = eda.evaluations + local.result.evaluations;
    best.wall_time = eda.wall_time + local.result.wall_time;
    Ok(RefinedResult { eda, local, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    fn sphere(c: Vec<f64>) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
        let n = c.len();
        FnObjective::new(n, move |x: &[f64]| {
            x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum()
        })
    }

    #[test]
    fn start_at_minimum() {
        let bx = ParameterBox::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let c = vec![1.0, -2.0, 3.0];
        let res = local_minimize(&sphere(c.clone()), &c, &bx, &LocalConfig::for_box(&bx)).unwrap();
        assert!(res.result.converged);
        for (a, b) in res.result.alpha_hat.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(res.iterations < 150, "{} iterations", res.iterations);
    }

    #[test]
    fn minimizer_outside_box() {
        let bx = ParameterBox::new(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let res = local_minimize(
            &sphere(vec![3.0, 0.25]),
            &[-0.5, -0.5],
            &bx,
            &LocalConfig::for_box(&bx),
        )
        .unwrap();
        assert!((res.result.alpha_hat[0] - 1.0).abs() < 1e-6);
        assert!((res.result.alpha_hat[1] - 0.25).abs() < 1e-5);
    }

    #[test]
    fn start_outside_box_is_rejected() {
        let bx = ParameterBox::new(vec![0.0], vec![1.0]).unwrap();
        let err = local_minimize(&sphere(vec![0.5]), &[2.0], &bx, &LocalConfig::for_box(&bx));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn penalty_everywhere_is_not_converged() {
        let bx = ParameterBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let obj = FnObjective::new(2, |_: &[f64]| f64::NAN);
        let res = local_minimize(&obj, &[0.5, 0.5], &bx, &LocalConfig::for_box(&bx)).unwrap();
        assert!(!res.result.converged);
        assert_eq!(res.result.fitness, PENALTY);
    }

    #[test]
    fn refinement_of_an_optimum_stays_put() {
        let bx = ParameterBox::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let c = vec![1.0, -2.0, 3.0];
        let cfg = LocalConfig::for_box(&bx);
        let res = local_minimize(&sphere(c.clone()), &c, &bx, &cfg).unwrap();
        for (a, b) in res.result.alpha_hat.iter().zip(&c) {
            assert!((a - b).abs() <= cfg.x_tol);
        }
    }

    #[test]
    fn refined_never_worse() {
        let bx = ParameterBox::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let obj = sphere(vec![1.0, -2.0, 3.0]);
        let mut ucfg = UmdacConfig::for_params(3);
        ucfg.generations = 5;
        let lcfg = LocalConfig::for_box(&bx);
        let mut strictly = 0;
        for seed in 0..10 {
            let r = refined_estimate(&obj, &bx, &ucfg, &lcfg, &mut RngStream::new(seed, 0)).unwrap();
            assert!(r.best.fitness <= r.eda.fitness);
            if r.best.fitness < r.eda.fitness {
                strictly += 1;
            }
        }
        assert!(strictly >= 9);
    }
}
