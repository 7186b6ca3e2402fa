//! Continuous Univariate Marginal Distribution Algorithm (UMDAc) with Gaussian
//! marginals, truncation selection and elitism.
//!
//! One generation: evaluate the new points, keep the `⌊τM⌋` best, fit an
//! independent Gaussian per coordinate to them, carry the `ε` best points over
//! unchanged and sample the remaining `M − ε` from the fitted marginals,
//! rejecting coordinates that leave the box.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ParameterBox;
use crate::objective::Objective;
use crate::rng::RngStream;

/// Relative floor on the marginal standard deviations, scaled by the widest
/// box interval.
pub const SIGMA_FLOOR_REL: f64 = 1e-9;

/// Rejection attempts per coordinate before clamping.
pub const MAX_REJECTIONS: usize = 100;

pub fn sigma_floor(bx: &ParameterBox) -> f64 {
    (SIGMA_FLOOR_REL * bx.max_width()).max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub fitness: Option<f64>,
    pub penalized: bool,
}

impl Individual {
    pub fn new(x: Vec<f64>) -> Self {
        Self {
            x,
            fitness: None,
            penalized: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMarginals {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UmdacConfig {
    /// `M`
    pub population_size: usize,
    /// `τ`
    pub tau: f64,
    pub elite_frac: f64,
    /// `G`
    pub generations: usize,
    /// Stop once the best fitness drops below this value.
    pub early_stop_value: Option<f64>,
    /// RK4 substeps per observation gap when the objective is the filter.
    pub substeps: usize,
}

impl UmdacConfig {
    /// `M = 20 p`, `τ = 0.3`, 5 % elitism, 50 generations.
    pub fn for_params(p: usize) -> Self {
        Self {
            population_size: 20 * p.max(1),
            tau: 0.3,
            elite_frac: 0.05,
            generations: 50,
            early_stop_value: None,
            substeps: crate::llfilter::DEFAULT_SUBSTEPS,
        }
    }

    pub fn n_selected(&self) -> usize {
        (self.tau * self.population_size as f64 + 1e-9).floor() as usize
    }

    /// `ε = ⌈elite_frac · M⌉`
    pub fn n_elite(&self) -> usize {
        (self.elite_frac * self.population_size as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("umdac config: {msg}")));
        if self.population_size < 2 {
            return bad("population size must be at least 2");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.elite_frac >= 0.0 && self.elite_frac < 1.0) {
            return bad("elite fraction must lie in [0, 1)");
        }
        if self.n_selected() < 2 {
            return bad("truncation must keep at least two points");
        }
        if self.generations < 1 {
            return bad("at least one generation is required");
        }
        if self.substeps < 1 {
            return bad("substeps must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Outcome of one optimiser run.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub alpha_hat: Vec<f64>,
    pub fitness: f64,
    pub penalized: bool,
    pub converged: bool,
    pub trace: Vec<GenerationStats>,
    pub evaluations: usize,
    pub wall_time: f64,
}

pub fn init_population(bx: &ParameterBox, m: usize, rng: &mut RngStream) -> Vec<Individual> {
    (0..m)
        .map(|_| {
            let x = (0..bx.dim())
                .map(|i| rng.uniform(bx.lo()[i], bx.hi()[i]).expect("box bounds are ordered"))
                .collect();
            Individual::new(x)
        })
        .collect()
}

/// Indices sorted by fitness, ties in original order.
fn ranking(pop: &[Individual]) -> Result<Vec<usize>> {
    let mut keyed = Vec::with_capacity(pop.len());
    for (i, ind) in pop.iter().enumerate() {
        let f = ind
            .fitness
            .ok_or_else(|| Error::Contract(format!("individual {i} has not been evaluated")))?;
        keyed.push((f, i));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Indices of the `⌊τ M⌋` fittest individuals, best first.
pub fn truncation_select(pop: &[Individual], tau: f64) -> Result<Vec<usize>> {
    let k = (tau * pop.len() as f64 + 1e-9).floor() as usize;
    if k < 2 {
        return Err(Error::Contract(format!(
            "truncation keeps {k} of {} individuals",
            pop.len()
        )));
    }
    let mut order = ranking(pop)?;
    order.truncate(k);
    Ok(order)
}

/// Maximum-likelihood Gaussian per coordinate (divide-by-n variance), with the
/// standard deviation floored at `floor`.
pub fn fit_marginals<P: AsRef<[f64]>>(selected: &[P], floor: f64) -> GaussianMarginals {
    let n = selected.len() as f64;
    let p = selected.first().map_or(0, |x| x.as_ref().len());
    let mut mu = vec![0.0; p];
    for x in selected {
        for (m, v) in mu.iter_mut().zip(x.as_ref()) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for x in selected {
        for ((s, v), m) in var.iter_mut().zip(x.as_ref()).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    let sigma = var.into_iter().map(|s| (s / n).sqrt().max(floor)).collect();
    GaussianMarginals { mu, sigma }
}

pub fn sample_population(
    marginals: &GaussianMarginals,
    bx: &ParameterBox,
    n: usize,
    rng: &mut RngStream,
) -> Vec<Individual> {
    (0..n)
        .map(|_| {
            let x = (0..bx.dim())
                .map(|i| {
                    let (lo, hi) = (bx.lo()[i], bx.hi()[i]);
                    let mut v = marginals.mu[i];
                    for _ in 0..MAX_REJECTIONS {
                        v = marginals.mu[i] + marginals.sigma[i] * rng.standard_normal();
                        if lo <= v && v <= hi {
                            return v;
                        }
                    }
                    v.clamp(lo, hi)
                })
                .collect();
            Individual::new(x)
        })
        .collect()
}

/// Snapshot handed to the observer after each generation has been evaluated.
pub struct GenerationView<'a> {
    pub generation: usize,
    pub population: &'a [Individual],
    /// Truncation-selected indices, best first.
    pub selected: &'a [usize],
}

pub fn umdac_minimize<O: Objective + ?Sized>(
    objective: &O,
    bx: &ParameterBox,
    config: &UmdacConfig,
    rng: &mut RngStream,
) -> Result<EstimationResult> {
    umdac_minimize_observed(objective, bx, config, rng, |_| {})
}

pub fn umdac_minimize_observed<O, F>(
    objective: &O,
    bx: &ParameterBox,
    config: &UmdacConfig,
    rng: &mut RngStream,
    mut observer: F,
) -> Result<EstimationResult>
where
    O: Objective + ?Sized,
    F: FnMut(&GenerationView<'_>),
{
    config.validate()?;
    if objective.dim() != bx.dim() {
        return Err(Error::InvalidParameter(format!(
            "objective has {} parameters but the box has {}",
            objective.dim(),
            bx.dim()
        )));
    }
    let start = Instant::now();
    let m = config.population_size;
    let n_elite = config.n_elite().min(m);
    let floor = sigma_floor(bx);

    let mut pop = init_population(bx, m, rng);
    let mut evaluations = 0;
    let mut trace = Vec::with_capacity(config.generations);
    let mut best: Option<Individual> = None;

    for generation in 1..=config.generations {
        evaluations += pop.iter().filter(|ind| ind.fitness.is_none()).count();
        pop.par_iter_mut()
            .filter(|ind| ind.fitness.is_none())
            .for_each(|ind| {
                let e = objective.evaluate(&ind.x);
                ind.fitness = Some(e.value);
                ind.penalized = e.penalized;
            });

        let order = ranking(&pop)?;
        let leader = &pop[order[0]];
        if best
            .as_ref()
            .is_none_or(|b| leader.fitness.unwrap() < b.fitness.unwrap())
        {
            best = Some(leader.clone());
        }

        let selected = truncation_select(&pop, config.tau)?;
        let points: Vec<&[f64]> = selected.iter().map(|&i| pop[i].x.as_slice()).collect();
        let marginals = fit_marginals(&points, floor);

        let mean = pop.iter().map(|ind| ind.fitness.unwrap()).sum::<f64>() / m as f64;
        let best_value = best.as_ref().unwrap().fitness.unwrap();
        trace.push(GenerationStats {
            generation,
            best: pop[order[0]].fitness.unwrap(),
            mean,
            mu: marginals.mu.clone(),
            sigma: marginals.sigma.clone(),
        });
        observer(&GenerationView {
            generation,
            population: &pop,
            selected: &selected,
        });

        let stop_early = config.early_stop_value.is_some_and(|v| best_value < v);
        if stop_early || generation == config.generations {
            break;
        }

        let mut next: Vec<Individual> = order[..n_elite].iter().map(|&i| pop[i].clone()).collect();
        next.extend(sample_population(&marginals, bx, m - n_elite, rng));
        pop = next;
    }

    let best = best.expect("at least one generation ran");
    Ok(EstimationResult {
        alpha_hat: best.x,
        fitness: best.fitness.unwrap(),
        penalized: best.penalized,
        converged: !best.penalized,
        trace,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    fn evaluated(f: &[f64]) -> Vec<Individual> {
        f.iter()
            .enumerate()
            .map(|(i, &v)| Individual {
                x: vec![i as f64],
                fitness: Some(v),
                penalized: false,
            })
            .collect()
    }

    #[test]
    fn degenerate_box_population() {
        let bx = ParameterBox::new(vec![1.0, -2.0], vec![1.0, -2.0]).unwrap();
        let pop = init_population(&bx, 10, &mut RngStream::new(1, 0));
        assert!(pop.iter().all(|ind| ind.x == vec![1.0, -2.0]));
    }

    #[test]
    fn uniform_population_moments() {
        let bx = ParameterBox::new(vec![0.0, 0.0, 0.0], vec![5.0, 5.0, 1.0]).unwrap();
        let pop = init_population(&bx, 60, &mut RngStream::new(123, 0));
        for (i, (center, width)) in [(2.5, 5.0), (2.5, 5.0), (0.5, 1.0)].into_iter().enumerate() {
            let mean = pop.iter().map(|ind| ind.x[i]).sum::<f64>() / 60.0;
            assert!((mean - center).abs() < 3.0 * width / (12.0f64 * 60.0).sqrt());
        }
    }

    #[test]
    fn population_determinism() {
        let bx = ParameterBox::new(vec![0.0], vec![1.0]).unwrap();
        let mut s = RngStream::new(5, 0);
        let a = init_population(&bx, 5, &mut s);
        let b = init_population(&bx, 5, &mut s);
        assert_ne!(a, b);
        let c = init_population(&bx, 5, &mut RngStream::new(5, 0));
        assert_eq!(a, c);
    }

    #[test]
    fn selection_sizes_and_ties() {
        let f: Vec<f64> = (0..60).map(|i| ((i * 37) % 60) as f64).collect();
        let sel = truncation_select(&evaluated(&f), 0.3).unwrap();
        assert_eq!(sel.len(), 18);
        assert!(sel.iter().all(|&i| f[i] < 18.0));

        let sel = truncation_select(&evaluated(&[1.0; 10]), 0.3).unwrap();
        assert_eq!(sel, vec![0, 1, 2]);

        let sel = truncation_select(&evaluated(&[3.0, 1.0, 2.0]), 1.0).unwrap();
        assert_eq!(sel, vec![1, 2, 0]);
    }

    #[test]
    fn selection_requires_evaluation() {
        let mut pop = evaluated(&[1.0, 2.0, 3.0]);
        pop[1].fitness = None;
        assert!(matches!(truncation_select(&pop, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn marginal_fit_by_hand() {
        let g = fit_marginals(&[vec![1.0], vec![3.0]], 1e-9);
        assert_eq!(g.mu, vec![2.0]);
        assert_eq!(g.sigma, vec![1.0]);
        let g = fit_marginals(&[vec![4.0, 1.0], vec![4.0, 1.0]], 1e-9);
        assert_eq!(g.sigma, vec![1e-9, 1e-9]);
    }

    #[test]
    fn marginal_fit_on_normal_samples() {
        let mut s = RngStream::new(77, 0);
        let pts: Vec<Vec<f64>> = (0..10_000).map(|_| vec![s.standard_normal()]).collect();
        let g = fit_marginals(&pts, 1e-9);
        assert!(g.mu[0].abs() < 0.04);
        assert!((g.sigma[0] - 1.0).abs() < 0.03);
    }

    #[test]
    fn sampling_at_floor() {
        let bx = ParameterBox::new(vec![0.0], vec![10.0]).unwrap();
        let floor = sigma_floor(&bx);
        let g = GaussianMarginals {
            mu: vec![4.0],
            sigma: vec![floor],
        };
        let pop = sample_population(&g, &bx, 1000, &mut RngStream::new(3, 0));
        assert!(pop.iter().all(|ind| (ind.x[0] - 4.0).abs() <= 6.0 * floor));
    }

    #[test]
    fn sampling_clamps_when_mean_is_outside() {
        let bx = ParameterBox::new(vec![0.0], vec![1.0]).unwrap();
        let g = GaussianMarginals {
            mu: vec![1.0 + 10.0 * 0.01],
            sigma: vec![0.01],
        };
        let pop = sample_population(&g, &bx, 20, &mut RngStream::new(3, 0));
        assert!(pop.iter().all(|ind| ind.x[0] == 1.0));
    }

    #[test]
    fn sampling_mean_with_wide_box() {
        let (mu, sigma) = (2.0, 0.5);
        let bx = ParameterBox::new(vec![mu - 10.0 * sigma], vec![mu + 10.0 * sigma]).unwrap();
        let g = GaussianMarginals {
            mu: vec![mu],
            sigma: vec![sigma],
        };
        let pop = sample_population(&g, &bx, 10_000, &mut RngStream::new(9, 0));
        let mean = pop.iter().map(|ind| ind.x[0]).sum::<f64>() / 10_000.0;
        assert!((mean - mu).abs() < 4.0 * sigma / 100.0);
    }

    #[test]
    fn single_generation_picks_better_draw() {
        let bx = ParameterBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let obj = FnObjective::new(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let cfg = UmdacConfig {
            population_size: 2,
            tau: 1.0,
            elite_frac: 0.05,
            generations: 1,
            early_stop_value: None,
            substeps: 64,
        };
        let res = umdac_minimize(&obj, &bx, &cfg, &mut RngStream::new(4, 0)).unwrap();
        let draws = init_population(&bx, 2, &mut RngStream::new(4, 0));
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let better = if f(&draws[0].x) <= f(&draws[1].x) { &draws[0] } else { &draws[1] };
        assert_eq!(res.alpha_hat, better.x);
        assert_eq!(res.evaluations, 2);
    }

    #[test]
    fn config_checks() {
        let mut c = UmdacConfig::for_params(3);
        assert_eq!(c.population_size, 60);
        assert_eq!(c.n_selected(), 18);
        assert_eq!(c.n_elite(), 3);
        assert!(c.validate().is_ok());
        c.tau = 0.01;
        assert!(c.validate().is_err());
        c.tau = 0.3;
        c.elite_frac = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn early_stop() {
        let bx = ParameterBox::new(vec![-5.0], vec![5.0]).unwrap();
        let obj = FnObjective::new(1, |x: &[f64]| x[0] * x[0]);
        let mut cfg = UmdacConfig::for_params(1);
        cfg.early_stop_value = Some(1e-3);
        let res = umdac_minimize(&obj, &bx, &cfg, &mut RngStream::new(2, 0)).unwrap();
        assert!(res.fitness < 1e-3);
        assert!(res.trace.len() < cfg.generations);
    }
}
