//! CSV files written and read by the experiment commands. Reals are written
//! with 17 significant digits so they read back bit for bit.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DVector;

use super::{ReplicationSummary, RunRecord, SlicePoint};
use crate::error::{Error, Result};
use crate::llfilter::FilterRun;
use crate::model::ParameterBox;
use crate::simulate::{ObservationSeries, Trajectory};
use crate::umdac::GenerationStats;

type Writer = csv::Writer<BufWriter<File>>;

fn writer(path: &Path) -> Result<Writer> {
    let file = File::create(path)?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered("x", traj.dim())).collect();
    w.write_record(&header)?;
    for j in (0..traj.len()).step_by(stride.max(1)) {
        let row: Vec<String> = std::iter::once(traj.time(j))
            .chain(traj.state(j).iter().copied())
            .map(real)
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_observations(path: &Path, obs: &ObservationSeries) -> Result<()> {
    let mut w = writer(path)?;
    let r = obs.values.first().map_or(0, |v| v.len());
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered("z", r)).collect();
    w.write_record(&header)?;
    for (t, z) in obs.times.iter().zip(&obs.values) {
        let row: Vec<String> = std::iter::once(*t).chain(z.iter().copied()).map(real).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file in the `observations.csv` layout (`t, z_1..z_r`).
pub fn read_observations(path: &Path, obs_dim: usize) -> Result<ObservationSeries> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != obs_dim + 1 {
            return Err(Error::Config(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 1,
                rec.len(),
                obs_dim + 1
            )));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("{}: bad number `{f}`", path.display())))
            })
            .collect::<Result<_>>()?;
        times.push(nums[0]);
        values.push(DVector::from_column_slice(&nums[1..]));
    }
    ObservationSeries::new(times, values)
}

/// One row per run: `rep, algorithm, seed, <params>, fitness, evaluations,
/// converged, penalized`, plus the UMDAc stage for refined runs.
pub fn write_runs(path: &Path, bx: &ParameterBox, records: &[RunRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let with_eda = records.iter().any(|r| r.eda.is_some());
    let mut header = vec!["rep".to_string(), "algorithm".into(), "seed".into()];
    header.extend(bx.names().iter().cloned());
    header.extend(["fitness", "evaluations", "converged", "penalized"].map(String::from));
    if with_eda {
        header.extend(bx.names().iter().map(|n| format!("eda_{n}")));
        header.push("eda_fitness".into());
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.rep.to_string(), r.algorithm.name().to_string(), r.seed.to_string()];
        row.extend(r.alpha_hat.iter().copied().map(real));
        row.push(real(r.fitness));
        row.push(r.evaluations.to_string());
        row.push(r.converged.to_string());
        row.push(r.penalized.to_string());
        if with_eda {
            match &r.eda {
                Some((a, f)) => {
                    row.extend(a.iter().copied().map(real));
                    row.push(real(*f));
                }
                None => row.extend(std::iter::repeat_n(String::new(), bx.dim() + 1)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock times, kept apart so every other file is reproducible byte for byte.
pub fn write_timing(path: &Path, records: &[RunRecord], total: f64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["rep", "wall_time"])?;
    for r in records {
        w.write_record([r.rep.to_string(), real(r.wall_time)])?;
    }
    w.write_record(["total".to_string(), real(total)])?;
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[GenerationStats]) -> Result<()> {
    let mut w = writer(path)?;
    let p = trace.first().map_or(0, |g| g.mu.len());
    let mut header = vec!["generation".to_string(), "best".into(), "mean".into()];
    header.extend(numbered("mu", p));
    header.extend(numbered("sigma", p));
    w.write_record(&header)?;
    for g in trace {
        let mut row = vec![g.generation.to_string(), real(g.best), real(g.mean)];
        row.extend(g.mu.iter().chain(&g.sigma).copied().map(real));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, s: &ReplicationSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["parameter", "true_value", "min", "max", "mean", "std", "runs", "failures"])?;
    for p in &s.parameters {
        w.write_record([
            p.name.clone(),
            p.true_value.map(real).unwrap_or_default(),
            real(p.min),
            real(p.max),
            real(p.mean),
            real(p.std),
            s.runs.to_string(),
            s.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The `mean` column of a `summary.csv`, in parameter order.
pub fn read_summary_means(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "mean")
        .ok_or_else(|| Error::Config(format!("{}: no `mean` column", path.display())))?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let f = rec.get(col).unwrap_or("");
            f.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: bad number `{f}`", path.display())))
        })
        .collect()
}

pub fn write_histograms(path: &Path, s: &ReplicationSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["parameter", "bin_lo", "bin_hi", "count"])?;
    for p in &s.parameters {
        for (i, c) in p.histogram.counts.iter().enumerate() {
            let (lo, hi) = p.histogram.edges(i);
            w.write_record([p.name.clone(), real(lo), real(hi), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, nu_*, var_nu_* (diagonal of Σν), y_* (filtered mean)`.
pub fn write_filter(path: &Path, run: &FilterRun) -> Result<()> {
    let mut w = writer(path)?;
    let r = run.innovations.first().map_or(0, |v| v.len());
    let d = run.filtered_means.first().map_or(0, |v| v.len());
    let mut header = vec!["t".to_string()];
    header.extend(numbered("nu", r));
    header.extend(numbered("var_nu", r));
    header.extend(numbered("y", d));
    w.write_record(&header)?;
    for k in 0..run.len() {
        let mut row = vec![real(run.times[k])];
        row.extend(run.innovations[k].iter().copied().map(real));
        row.extend(run.innovation_covs[k].diagonal().iter().copied().map(real));
        row.extend(run.filtered_means[k].iter().copied().map(real));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slice(path: &Path, bx: &ParameterBox, points: &[SlicePoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["parameter", "value", "fitness", "penalized"])?;
    for s in points {
        w.write_record([
            bx.names()[s.coord].clone(),
            real(s.value),
            real(s.fitness),
            s.penalized.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
