//! The innovation fitness
//!
//! ```text
//! q(α) = N r ln 2π + Σ_k [ ln det Σν_k + ν_kᵀ Σν_k⁻¹ ν_k ]
//! ```
//!
//! and the [`Objective`] abstraction the optimizers minimise.

use crate::llfilter::{run_filter_with, FilterOptions};
use crate::model::EstimationProblem;

/// Fitness assigned whenever the filter fails at a parameter value.
pub const PENALTY: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessEvaluation {
    pub alpha: Vec<f64>,
    pub value: f64,
    pub penalized: bool,
    /// Innovation terms that entered `value`.
    pub n_used: usize,
}

impl FitnessEvaluation {
    pub fn penalty(alpha: &[f64], n_used: usize) -> Self {
        Self {
            alpha: alpha.to_vec(),
            value: PENALTY,
            penalized: true,
            n_used,
        }
    }
}

pub fn q_fitness(problem: &EstimationProblem, alpha: &[f64], substeps: usize) -> FitnessEvaluation {
    q_fitness_with(problem, alpha, &FilterOptions::new(substeps))
}

pub fn q_fitness_with(
    problem: &EstimationProblem,
    alpha: &[f64],
    opts: &FilterOptions,
) -> FitnessEvaluation {
    if alpha.iter().any(|v| !v.is_finite()) {
        return FitnessEvaluation::penalty(alpha, 0);
    }
    let run = run_filter_with(problem, alpha, opts);
    if !run.is_ok() || !run.fitness.is_finite() {
        return FitnessEvaluation::penalty(alpha, run.len());
    }
    FitnessEvaluation {
        alpha: alpha.to_vec(),
        value: run.fitness,
        penalized: false,
        n_used: run.len(),
    }
}

/// A function to be minimised over a box. Implementations must be pure so
/// that a population can be evaluated concurrently.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> FitnessEvaluation;
}

/// `q(α)` for a fixed problem.
pub struct InnovationObjective<'a> {
    pub problem: &'a EstimationProblem,
    pub options: FilterOptions,
}

impl<'a> InnovationObjective<'a> {
    pub fn new(problem: &'a EstimationProblem, substeps: usize) -> Self {
        Self::with_options(problem, FilterOptions::new(substeps))
    }

    pub fn with_options(problem: &'a EstimationProblem, options: FilterOptions) -> Self {
        Self { problem, options }
    }
}

impl Objective for InnovationObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.model.param_count()
    }

    fn evaluate(&self, x: &[f64]) -> FitnessEvaluation {
        q_fitness_with(self.problem, x, &self.options)
    }
}

/// Wraps a plain function; non-finite values are penalised.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> FitnessEvaluation {
        let v = (self.f)(x);
        if v.is_finite() {
            FitnessEvaluation {
                alpha: x.to_vec(),
                value: v,
                penalized: false,
                n_used: 0,
            }
        } else {
            FitnessEvaluation::penalty(x, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OrnsteinUhlenbeck, ParameterBox};
    use crate::simulate::ObservationSeries;
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn ou_problem(times: Vec<f64>, values: Vec<f64>, y0: f64, q0: f64) -> EstimationProblem {
        let obs = ObservationSeries::new(
            times,
            values.into_iter().map(|v| DVector::from_element(1, v)).collect(),
        )
        .unwrap();
        EstimationProblem::new(
            Arc::new(OrnsteinUhlenbeck::new(0.0, 1.0, 0.5)),
            obs,
            ParameterBox::new(vec![0.1], vec![5.0]).unwrap(),
            DVector::from_element(1, y0),
            DMatrix::from_element(1, 1, q0),
        )
        .unwrap()
    }

    #[test]
    fn no_gaps_no_fitness() {
        let p = ou_problem(vec![0.0], vec![0.3], 0.0, 1.0);
        let e = q_fitness(&p, &[1.0], 64);
        assert_eq!(e.value, 0.0);
        assert!(!e.penalized);
        assert_eq!(e.n_used, 0);
    }

    #[test]
    fn single_term_by_hand() {
        // θ(0 − x) with y0 = 0 keeps the mean at 0; Q(Δ) = q0 e^{−2Δ} + (1 − e^{−2Δ})/2.
        // With q0 = 1/2, Q stays at 1/2, Σν = 1/2 + 1/2 = 1 and ν = z = 1.
        let p = ou_problem(vec![0.0, 0.3], vec![0.0, 1.0], 0.0, 0.5);
        let e = q_fitness(&p, &[1.0], 64);
        assert!((e.value - 2.837_877_066_409_345).abs() < 1e-9, "{}", e.value);
        assert_eq!(e.n_used, 1);
    }

    #[test]
    fn non_finite_alpha_is_penalized() {
        let p = ou_problem(vec![0.0, 0.3], vec![0.0, 1.0], 0.0, 0.5);
        let e = q_fitness(&p, &[f64::NAN], 64);
        assert!(e.penalized);
        assert_eq!(e.value, PENALTY);
    }

    #[test]
    fn deterministic() {
        let p = ou_problem(vec![0.0, 0.5, 1.0, 1.5], vec![0.1, -0.2, 0.4, 0.0], 0.0, 0.5);
        let a = q_fitness(&p, &[0.8], 64);
        let b = q_fitness(&p, &[0.8], 64);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
