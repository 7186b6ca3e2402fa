use std::path::Path;
use std::process::Command;

use innovest::experiment::{self, Algorithm, ExperimentConfig, SliceCoords};
use innovest::objective::FnObjective;
use innovest::ParameterBox;

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

/// Short multiplicative-model study; seed 4 gives a bounded realization.
fn small_mult(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_model("mult").unwrap();
    cfg.seed = 4;
    cfg.simulation.n_obs = 40;
    cfg.umdac.generations = 4;
    cfg.local.max_iters = 30;
    cfg.out = out.to_path_buf();
    cfg
}

#[test]
fn fhn_simulation_has_501_observation_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_model("fhn").unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.trajectory_stride = 1000;
    let o = experiment::cmd_simulate(&cfg).unwrap();
    assert_eq!(o.observations.len(), 501);
    assert_eq!(rows(&dir.path().join("observations.csv")).len(), 501);
    assert_eq!(rows(&dir.path().join("trajectory.csv")).len(), 501);
}

#[test]
fn zero_gaps_give_a_single_observation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_mult(dir.path());
    cfg.simulation.n_obs = 0;
    experiment::cmd_simulate(&cfg).unwrap();
    let obs = rows(&dir.path().join("observations.csv"));
    assert_eq!(obs.len(), 1);
    assert_eq!(obs[0][0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn observations_file_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_mult(dir.path());
    cfg.algo = Algorithm::Refined;
    experiment::cmd_simulate(&cfg).unwrap();
    let inline = experiment::cmd_estimate(&cfg).unwrap();

    let other = tempfile::tempdir().unwrap();
    let mut from_file = cfg.clone();
    from_file.obs_file = Some(dir.path().join("observations.csv"));
    from_file.out = other.path().to_path_buf();
    let reread = experiment::cmd_estimate(&from_file).unwrap();
    assert_eq!(inline.alpha_hat, reread.alpha_hat);
    assert_eq!(inline.fitness, reread.fitness);
    assert_eq!(
        std::fs::read(dir.path().join("estimate.csv")).unwrap(),
        std::fs::read(other.path().join("estimate.csv")).unwrap()
    );
}

#[test]
fn replicate_accounts_for_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_mult(dir.path());
    cfg.reps = 3;
    cfg.hist_bins = 7;
    let o = experiment::cmd_replicate(&cfg).unwrap();
    assert_eq!(o.records.len(), 3);
    assert!(o.records.iter().enumerate().all(|(i, r)| r.rep == i));
    for p in &o.summary.parameters {
        assert_eq!(p.histogram.counts.len(), 7);
        assert_eq!(p.histogram.total() + o.summary.failures, 3);
        assert!(p.min <= p.mean && p.mean <= p.max);
    }
    let hist = rows(&dir.path().join("histograms.csv"));
    assert_eq!(hist.len(), 5 * 7);
    assert_eq!(rows(&dir.path().join("runs.csv")).len(), 3);
    assert_eq!(rows(&dir.path().join("summary.csv")).len(), 5);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let files = ["runs.csv", "summary.csv", "histograms.csv"];
    let mut outputs = Vec::new();
    for jobs in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_mult(dir.path());
        cfg.reps = 3;
        cfg.algo = Algorithm::Refined;
        cfg.jobs = jobs;
        experiment::cmd_replicate(&cfg).unwrap();
        outputs.push(files.map(|f| std::fs::read(dir.path().join(f)).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn single_repetition_summary_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_mult(dir.path());
    cfg.simulation.n_obs = 20;
    cfg.umdac.generations = 2;
    let o = experiment::cmd_replicate(&cfg).unwrap();
    if o.summary.failures == 0 {
        for p in &o.summary.parameters {
            assert_eq!(p.min, p.max);
            assert_eq!(p.min, p.mean);
        }
    }
}

#[test]
fn two_point_slice_hits_the_box_ends() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_mult(dir.path());
    cfg.slice_grid = 2;
    cfg.slice_coords = SliceCoords::One(2);
    let pts = experiment::cmd_fitness_slice(&cfg).unwrap();
    let values: Vec<f64> = pts.iter().map(|p| p.value).collect();
    assert_eq!(values, vec![0.0, 0.3]);
    assert!(pts.iter().all(|p| p.coord == 2));
}

#[test]
fn sphere_slices_are_convex() {
    let bx = ParameterBox::new(vec![-2.0, 0.0], vec![3.0, 1.0]).unwrap();
    let obj = FnObjective::new(2, |x: &[f64]| (x[0] - 0.5).powi(2) + 3.0 * (x[1] - 0.2).powi(2));
    let pts = experiment::fitness_slice(&obj, &bx, &[0.5, 0.2], &[0, 1], 15);
    for c in 0..2 {
        let q: Vec<f64> = pts.iter().filter(|p| p.coord == c).map(|p| p.fitness).collect();
        assert_eq!(q.len(), 15);
        assert!(q.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > 0.0));
    }
}

fn innovest(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_innovest")).args(args).output().unwrap()
}

#[test]
fn binary_subcommands_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let ok = innovest(&["simulate", "--model", "mult", "--seed", "4", "--obs.n", "5", "--out", out]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("seed = 4"));
    assert!(dir.path().join("observations.csv").exists());

    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "model = mult\nseed = 4\nobs.n = 10\numdac.generations = 2\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    for sub in ["estimate", "replicate", "filter", "fitness-slice"] {
        let o = innovest(&[sub, "--config", cfg, "--out", out, "--slice.grid", "2", "--reps", "2", "--jobs", "1"]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let refined = innovest(&["estimate", "--config", cfg, "--algo", "refined", "--out", out]);
    assert_eq!(refined.status.code(), Some(0));

    assert_eq!(innovest(&["estimate", "--algo", "anneal", "--out", out]).status.code(), Some(1));
    assert_eq!(innovest(&["fitness-slice", "--slice.coord", "9", "--out", out]).status.code(), Some(1));
    assert_eq!(innovest(&["simulate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(innovest(&["--help"]).status.code(), Some(0));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let io = innovest(&["simulate", "--obs.n", "2", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(2));

    // seed 1 multiplicative data escape to −∞ in finite time
    let diverged = innovest(&["simulate", "--model", "mult", "--seed", "1", "--out", out]);
    assert_eq!(diverged.status.code(), Some(3));
}
