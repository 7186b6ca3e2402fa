//! Batch studies driven by an [`ExperimentConfig`]: data generation, single
//! estimations, replication studies, filter dumps and fitness slices. Every
//! command writes CSV files into the configured output directory and returns
//! the in-memory result as well.
//!
//! Random streams: the observation series of a study comes from
//! `RngStream::new(seed, DATA_STREAM)`, and repetition `r` of an optimizer
//! from `RngStream::new(seed, r)`; `estimate` is repetition 0.

pub mod config;
mod csvio;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{Algorithm, ConfigMap, ExperimentConfig, SliceCoords, KEYS};
pub use csvio::{read_observations, read_summary_means};

use crate::error::{Error, Result};
use crate::llfilter::{run_filter_with, FilterRun};
use crate::local::{loa_estimate, refined_estimate};
use crate::model::{EstimationProblem, ParameterBox};
use crate::objective::{InnovationObjective, Objective};
use crate::rng::RngStream;
use crate::simulate::{simulate_observations, ObservationSeries, Trajectory};
use crate::umdac::{umdac_minimize, GenerationStats};

/// Stream id reserved for the synthetic observation series.
pub const DATA_STREAM: u64 = u64::MAX;

pub fn data_stream(seed: u64) -> RngStream {
    RngStream::new(seed, DATA_STREAM)
}

pub fn repetition_stream(seed: u64, rep: usize) -> RngStream {
    RngStream::new(seed, rep as u64)
}

/// Simulated path and observations, or observations read from `obs.file`.
pub fn observations(cfg: &ExperimentConfig) -> Result<(Option<Trajectory>, ObservationSeries)> {
    match &cfg.obs_file {
        Some(path) => Ok((None, read_observations(path, cfg.model.obs_dim())?)),
        None => {
            let (traj, obs) = simulate_observations(
                cfg.model.as_ref(),
                &cfg.true_alpha,
                &cfg.simulation,
                &data_stream(cfg.seed),
            )?;
            Ok((Some(traj), obs))
        }
    }
}

pub fn problem(cfg: &ExperimentConfig, obs: ObservationSeries) -> Result<EstimationProblem> {
    let mut p = EstimationProblem::new(
        cfg.model.clone(),
        obs,
        cfg.param_box.clone(),
        cfg.initial_mean(),
        cfg.initial_cov(),
    )?;
    p.initial_update = cfg.initial_update;
    Ok(p)
}

/// One optimizer run of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub rep: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub alpha_hat: Vec<f64>,
    pub fitness: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub penalized: bool,
    pub wall_time: f64,
    /// UMDAc generation trace (empty for `loa`).
    pub trace: Vec<GenerationStats>,
    /// The UMDAc stage of a `refined` run: estimate and fitness.
    pub eda: Option<(Vec<f64>, f64)>,
}

pub fn run_estimation(cfg: &ExperimentConfig, problem: &EstimationProblem, rep: usize) -> Result<RunRecord> {
    let objective = InnovationObjective::with_options(problem, cfg.filter);
    let mut rng = repetition_stream(cfg.seed, rep);
    let bx = &problem.param_box;
    let (result, eda) = match cfg.algo {
        Algorithm::Umdac => (umdac_minimize(&objective, bx, &cfg.umdac, &mut rng)?, None),
        Algorithm::Refined => {
            let r = refined_estimate(&objective, bx, &cfg.umdac, &cfg.local, &mut rng)?;
            let eda = Some((r.eda.alpha_hat.clone(), r.eda.fitness));
            (r.best, eda)
        }
        Algorithm::Loa => (loa_estimate(&objective, bx, &cfg.local, &mut rng)?.result, None),
    };
    Ok(RunRecord {
        rep,
        algorithm: cfg.algo,
        seed: cfg.seed,
        alpha_hat: result.alpha_hat,
        fitness: result.fitness,
        evaluations: result.evaluations,
        converged: result.converged,
        penalized: result.penalized,
        wall_time: result.wall_time,
        trace: result.trace,
        eda,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; the right edge belongs to the last bin.
    pub fn new(lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        let width = hi - lo;
        for v in values {
            let i = if width > 0.0 {
                (((v - lo) / width) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize
            } else {
                0
            };
            counts[i] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        let lo = self.lo + i as f64 * w;
        let hi = if i + 1 == self.counts.len() { self.hi } else { lo + w };
        (lo, hi)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub true_value: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
    pub histogram: Histogram,
}

/// Statistics over the runs that did not fail; failed runs are only counted.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationSummary {
    pub parameters: Vec<ParameterSummary>,
    pub runs: usize,
    pub failures: usize,
    pub runtime: f64,
}

pub fn summarize(records: &[RunRecord], bx: &ParameterBox, bins: usize, runtime: f64) -> ReplicationSummary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.converged).collect();
    let n = ok.len();
    let parameters = (0..bx.dim())
        .map(|i| {
            let vals: Vec<f64> = ok.iter().map(|r| r.alpha_hat[i]).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            ParameterSummary {
                name: bx.names()[i].clone(),
                true_value: bx.true_values().map(|t| t[i]),
                min: vals.iter().copied().fold(f64::NAN, f64::min),
                max: vals.iter().copied().fold(f64::NAN, f64::max),
                mean,
                std: if n > 0 { var.sqrt() } else { f64::NAN },
                histogram: Histogram::new(bx.lo()[i], bx.hi()[i], bins, vals.iter().copied()),
            }
        })
        .collect();
    ReplicationSummary {
        parameters,
        runs: records.len(),
        failures: records.len() - n,
        runtime,
    }
}

fn create_out(cfg: &ExperimentConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub trajectory: Trajectory,
    pub observations: ObservationSeries,
    pub files: Vec<PathBuf>,
}

/// Writes `trajectory.csv` and `observations.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutput> {
    let (trajectory, observations) = simulate_observations(
        cfg.model.as_ref(),
        &cfg.true_alpha,
        &cfg.simulation,
        &data_stream(cfg.seed),
    )?;
    let out = create_out(cfg)?;
    let files = vec![out.join("trajectory.csv"), out.join("observations.csv")];
    csvio::write_trajectory(&files[0], &trajectory, cfg.trajectory_stride)?;
    csvio::write_observations(&files[1], &observations)?;
    Ok(SimulateOutput {
        trajectory,
        observations,
        files,
    })
}

/// Writes `estimate.csv`, `timing.csv` and, for EDA runs, `trace.csv`.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let (_, obs) = observations(cfg)?;
    let problem = problem(cfg, obs)?;
    let record = thread_pool(cfg.jobs)?.install(|| run_estimation(cfg, &problem, 0))?;
    let out = create_out(cfg)?;
    csvio::write_runs(&out.join("estimate.csv"), &problem.param_box, std::slice::from_ref(&record))?;
    csvio::write_timing(&out.join("timing.csv"), std::slice::from_ref(&record), record.wall_time)?;
    if !record.trace.is_empty() {
        csvio::write_trace(&out.join("trace.csv"), &record.trace)?;
    }
    Ok(record)
}

#[derive(Clone, Debug)]
pub struct ReplicateOutput {
    pub records: Vec<RunRecord>,
    pub summary: ReplicationSummary,
}

/// `reps` optimizer runs on one observation series. Writes `runs.csv`,
/// `summary.csv`, `histograms.csv` and `timing.csv`.
pub fn cmd_replicate(cfg: &ExperimentConfig) -> Result<ReplicateOutput> {
    let (_, obs) = observations(cfg)?;
    let problem = problem(cfg, obs)?;
    let start = Instant::now();
    let records = thread_pool(cfg.jobs)?.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_estimation(cfg, &problem, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(&records, &problem.param_box, cfg.hist_bins, start.elapsed().as_secs_f64());
    let out = create_out(cfg)?;
    csvio::write_runs(&out.join("runs.csv"), &problem.param_box, &records)?;
    csvio::write_summary(&out.join("summary.csv"), &summary)?;
    csvio::write_histograms(&out.join("histograms.csv"), &summary)?;
    csvio::write_timing(&out.join("timing.csv"), &records, summary.runtime)?;
    Ok(ReplicateOutput { records, summary })
}

/// Runs the filter at `filter.alpha` and writes `filter.csv`.
pub fn cmd_filter(cfg: &ExperimentConfig) -> Result<FilterRun> {
    let (_, obs) = observations(cfg)?;
    let problem = problem(cfg, obs)?;
    let run = run_filter_with(&problem, &cfg.filter_alpha, &cfg.filter);
    let out = create_out(cfg)?;
    csvio::write_filter(&out.join("filter.csv"), &run)?;
    Ok(run)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlicePoint {
    /// Zero-based coordinate being swept.
    pub coord: usize,
    pub value: f64,
    pub fitness: f64,
    pub penalized: bool,
}

/// `grid` equally spaced points over `[lo, hi]`, both endpoints included.
pub fn linspace(lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    if grid == 1 {
        return vec![lo];
    }
    (0..grid)
        .map(|j| {
            if j + 1 == grid {
                hi
            } else {
                lo + (hi - lo) * j as f64 / (grid - 1) as f64
            }
        })
        .collect()
}

/// Centre used by `fitness-slice`: `slice.center`, else the means of a
/// previous `replicate` in the output directory, else the true parameter.
pub fn slice_center(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if let Some(c) = &cfg.slice_center {
        return Ok(c.clone());
    }
    let summary = cfg.out.join("summary.csv");
    if summary.exists() {
        let means = read_summary_means(&summary)?;
        if means.len() == cfg.param_box.dim() && means.iter().all(|v| v.is_finite()) {
            return Ok(means);
        }
    }
    Ok(cfg.true_alpha.clone())
}

/// Sweeps each coordinate in `coords` across its box interval on `grid`
/// points with the others fixed at `center`. Points come back grouped by
/// coordinate, in sweep order.
pub fn fitness_slice<O: Objective + ?Sized>(
    objective: &O,
    bx: &ParameterBox,
    center: &[f64],
    coords: &[usize],
    grid: usize,
) -> Vec<SlicePoint> {
    let jobs: Vec<(usize, f64)> = coords
        .iter()
        .flat_map(|&c| linspace(bx.lo()[c], bx.hi()[c], grid).into_iter().map(move |v| (c, v)))
        .collect();
    jobs.par_iter()
        .map(|&(coord, value)| {
            let mut alpha = center.to_vec();
            alpha[coord] = value;
            let e = objective.evaluate(&alpha);
            SlicePoint {
                coord,
                value,
                fitness: e.value,
                penalized: e.penalized,
            }
        })
        .collect()
}

/// [`fitness_slice`] of `q` on the configured problem; writes `slice.csv`.
pub fn cmd_fitness_slice(cfg: &ExperimentConfig) -> Result<Vec<SlicePoint>> {
    let (_, obs) = observations(cfg)?;
    let problem = problem(cfg, obs)?;
    let center = slice_center(cfg)?;
    let bx = &problem.param_box;
    let coords: Vec<usize> = match cfg.slice_coords {
        SliceCoords::All => (0..bx.dim()).collect(),
        SliceCoords::One(c) => vec![c],
    };
    let objective = InnovationObjective::with_options(&problem, cfg.filter);
    let points = thread_pool(cfg.jobs)?
        .install(|| fitness_slice(&objective, bx, &center, &coords, cfg.slice_grid));
    let out = create_out(cfg)?;
    csvio::write_slice(&out.join("slice.csv"), bx, &points)?;
    Ok(points)
}

/// Range `max q − min q` of each swept coordinate, in coordinate order.
pub fn slice_ranges(points: &[SlicePoint], p: usize) -> Vec<f64> {
    (0..p)
        .map(|c| {
            let vals = points.iter().filter(|s| s.coord == c).map(|s| s.fitness);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect()
}
