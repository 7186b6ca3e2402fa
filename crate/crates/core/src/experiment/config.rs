//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # FitzHugh–Nagumo study
//! model = fhn
//! seed = 7
//! umdac.generations = 50
//! box.hi = 5, 5, 1
//! ```
//!
//! Blank lines and `#` comments are ignored, lists are comma separated, and
//! anything not given takes the model's default. Every key can also be set
//! from the command line as `--<key> <value>`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::llfilter::{FilterOptions, DEFAULT_MAX_DISPLACEMENT, DEFAULT_SUBSTEPS};
use crate::local::LocalConfig;
use crate::model::{self, FitzHughNagumo, MultiplicativeNoise, ParameterBox, SharedModel};
use crate::simulate::SimulationSettings;
use crate::umdac::UmdacConfig;

/// Every recognised key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("model", "built-in model: fhn | mult"),
    ("seed", "master seed for data and optimizer streams"),
    ("out", "output directory"),
    ("algo", "estimation algorithm: umdac | refined | loa"),
    ("reps", "repetitions R for replicate"),
    ("jobs", "worker threads (0 = all cores)"),
    ("model.alpha", "true parameter vector used for simulation"),
    ("model.x0", "initial state x(t0)"),
    ("sim.t0", "initial time"),
    ("sim.h", "Euler-Maruyama step"),
    ("sim.trajectory_stride", "write every n-th fine-grid node to trajectory.csv"),
    ("obs.delta", "observation interval"),
    ("obs.n", "number of observation gaps N"),
    ("obs.file", "read observations from this CSV instead of simulating"),
    ("box.lo", "lower search bounds"),
    ("box.hi", "upper search bounds"),
    ("filter.substeps", "RK4 steps per observation gap"),
    ("filter.relinearize", "re-linearize before every RK4 step (true | false)"),
    ("filter.max_displacement", "mean displacement limit per re-linearized step"),
    ("filter.y0", "initial filter mean (default: model.x0)"),
    ("filter.q0", "initial filter covariance as a multiple of the identity"),
    ("filter.initial_update", "assimilate z(t0) before the first prediction"),
    ("filter.alpha", "parameter at which `filter` runs (default: model.alpha)"),
    ("umdac.population", "population size M (default 20 p)"),
    ("umdac.tau", "truncation fraction"),
    ("umdac.elite_frac", "elite fraction"),
    ("umdac.generations", "number of generations G"),
    ("umdac.early_stop", "stop once the best fitness is at or below this value"),
    ("local.max_iters", "Nelder-Mead iteration limit (default 400 p)"),
    ("local.x_tol", "simplex diameter tolerance (default 1e-6 of the widest box side)"),
    ("local.f_tol", "simplex value-spread tolerance"),
    ("hist.bins", "equal-width histogram bins per parameter"),
    ("slice.coord", "fitness-slice coordinate, 1-based, or `all`"),
    ("slice.grid", "points per fitness slice"),
    ("slice.center", "centre of the fitness slices (default: summary.csv means, else model.alpha)"),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw key/value pairs before defaults and type checks are applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in other.iter() {
            self.entries.insert(k.to_string(), v.to_string());
        }
    }
}

impl FromStr for ConfigMap {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut map = ConfigMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            map.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(map)
    }
}

impl fmt::Display for ConfigMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.iter() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Umdac,
    Refined,
    Loa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Umdac => "umdac",
            Algorithm::Refined => "refined",
            Algorithm::Loa => "loa",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "umdac" => Ok(Algorithm::Umdac),
            "refined" => Ok(Algorithm::Refined),
            "loa" => Ok(Algorithm::Loa),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected umdac, refined or loa)"
            ))),
        }
    }
}

/// Which coordinates a fitness slice sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceCoords {
    All,
    /// Zero-based coordinate.
    One(usize),
}

/// A fully resolved experiment.
#[derive(Clone)]
pub struct ExperimentConfig {
    pub model: SharedModel,
    pub true_alpha: Vec<f64>,
    pub simulation: SimulationSettings,
    pub trajectory_stride: usize,
    pub obs_file: Option<PathBuf>,
    pub param_box: ParameterBox,
    pub filter: FilterOptions,
    pub y0: Vec<f64>,
    pub q0: f64,
    pub initial_update: bool,
    pub filter_alpha: Vec<f64>,
    pub algo: Algorithm,
    pub umdac: UmdacConfig,
    pub local: LocalConfig,
    pub reps: usize,
    pub jobs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub hist_bins: usize,
    pub slice_coords: SliceCoords,
    pub slice_grid: usize,
    pub slice_center: Option<Vec<f64>>,
}

impl fmt::Debug for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExperimentConfig")
            .field("model", &self.model.name())
            .field("true_alpha", &self.true_alpha)
            .field("seed", &self.seed)
            .field("algo", &self.algo)
            .field("reps", &self.reps)
            .field("out", &self.out)
            .finish_non_exhaustive()
    }
}

struct ModelDefaults {
    alpha: Vec<f64>,
    x0: Vec<f64>,
    h: f64,
    delta: f64,
    n: usize,
    param_box: ParameterBox,
}

fn model_defaults(name: &str) -> Result<ModelDefaults> {
    match name {
        "fhn" => Ok(ModelDefaults {
            alpha: FitzHughNagumo::TRUE_ALPHA.to_vec(),
            x0: FitzHughNagumo::X0.to_vec(),
            h: 0.0005,
            delta: 0.5,
            n: 500,
            param_box: FitzHughNagumo::search_box(),
        }),
        "mult" => Ok(ModelDefaults {
            alpha: MultiplicativeNoise::TRUE_ALPHA.to_vec(),
            x0: MultiplicativeNoise::X0.to_vec(),
            h: 0.005,
            delta: 0.5,
            n: 500,
            param_box: MultiplicativeNoise::search_box(),
        }),
        other => Err(Error::Config(format!("unknown model `{other}`"))),
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn check_len(key: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Config(format!(
            "`{key}` has {} entries, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Defaults for `model` with nothing overridden.
    pub fn for_model(model: &str) -> Result<Self> {
        let mut map = ConfigMap::new();
        map.set("model", model)?;
        Self::from_map(&map)
    }

    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let name = map.get("model").unwrap_or("fhn");
        let model = model::builtin(name)?;
        let defaults = model_defaults(name)?;
        let p = model.param_count();
        let d = model.state_dim();

        let get = |key: &str| map.get(key);
        let num = |key: &str| get(key).map(|v| parse::<f64>(key, v)).transpose();
        let int = |key: &str| get(key).map(|v| parse::<usize>(key, v)).transpose();
        let list = |key: &str| get(key).map(|v| parse_list(key, v)).transpose();
        let flag = |key: &str| get(key).map(|v| parse_bool(key, v)).transpose();

        let true_alpha = list("model.alpha")?.unwrap_or(defaults.alpha);
        check_len("model.alpha", &true_alpha, p)?;
        let x0 = list("model.x0")?.unwrap_or(defaults.x0);
        check_len("model.x0", &x0, d)?;

        let simulation = SimulationSettings {
            x0: x0.clone(),
            t0: num("sim.t0")?.unwrap_or(0.0),
            h: num("sim.h")?.unwrap_or(defaults.h),
            delta: num("obs.delta")?.unwrap_or(defaults.delta),
            n_obs: int("obs.n")?.unwrap_or(defaults.n),
        };
        if !(simulation.h > 0.0) || !(simulation.delta > 0.0) {
            return Err(Error::Config("`sim.h` and `obs.delta` must be positive".into()));
        }
        let trajectory_stride = int("sim.trajectory_stride")?.unwrap_or(1).max(1);

        let lo = list("box.lo")?.unwrap_or_else(|| defaults.param_box.lo().to_vec());
        let hi = list("box.hi")?.unwrap_or_else(|| defaults.param_box.hi().to_vec());
        check_len("box.lo", &lo, p)?;
        check_len("box.hi", &hi, p)?;
        let param_box = ParameterBox::new(lo, hi)?.with_true_values(true_alpha.clone())?;

        let substeps = int("filter.substeps")?.unwrap_or(DEFAULT_SUBSTEPS);
        let filter = FilterOptions {
            substeps,
            relinearize: flag("filter.relinearize")?.unwrap_or(true),
            max_displacement: num("filter.max_displacement")?.unwrap_or(DEFAULT_MAX_DISPLACEMENT),
        };
        if substeps < 1 || !(filter.max_displacement > 0.0) {
            return Err(Error::Config(
                "`filter.substeps` and `filter.max_displacement` must be positive".into(),
            ));
        }
        let y0 = list("filter.y0")?.unwrap_or_else(|| x0.clone());
        check_len("filter.y0", &y0, d)?;
        let filter_alpha = list("filter.alpha")?.unwrap_or_else(|| true_alpha.clone());
        check_len("filter.alpha", &filter_alpha, p)?;
        let q0 = num("filter.q0")?.unwrap_or(1e-2);
        if !(q0 >= 0.0) {
            return Err(Error::Config("`filter.q0` must be non-negative".into()));
        }

        let mut umdac = UmdacConfig::for_params(p);
        umdac.substeps = substeps;
        if let Some(m) = int("umdac.population")? {
            umdac.population_size = m;
        }
        if let Some(v) = num("umdac.tau")? {
            umdac.tau = v;
        }
        if let Some(v) = num("umdac.elite_frac")? {
            umdac.elite_frac = v;
        }
        if let Some(g) = int("umdac.generations")? {
            umdac.generations = g;
        }
        umdac.early_stop_value = num("umdac.early_stop")?;
        umdac.validate().map_err(|e| Error::Config(e.to_string()))?;

        let mut local = LocalConfig::for_box(&param_box);
        local.substeps = substeps;
        if let Some(v) = int("local.max_iters")? {
            local.max_iters = v;
        }
        if let Some(v) = num("local.x_tol")? {
            local.x_tol = v;
        }
        if let Some(v) = num("local.f_tol")? {
            local.f_tol = v;
        }
        local.validate().map_err(|e| Error::Config(e.to_string()))?;

        let reps = int("reps")?.unwrap_or(1);
        if reps < 1 {
            return Err(Error::Config("`reps` must be at least 1".into()));
        }
        let hist_bins = int("hist.bins")?.unwrap_or(20);
        if hist_bins < 1 {
            return Err(Error::Config("`hist.bins` must be at least 1".into()));
        }

        let slice_coords = match get("slice.coord") {
            None | Some("all") => SliceCoords::All,
            Some(v) => {
                let c: usize = parse("slice.coord", v)?;
                if c < 1 || c > p {
                    return Err(Error::Config(format!(
                        "`slice.coord` = {c} is outside 1..={p}"
                    )));
                }
                SliceCoords::One(c - 1)
            }
        };
        let slice_grid = int("slice.grid")?.unwrap_or(41);
        if slice_grid < 2 {
            return Err(Error::Config("`slice.grid` must be at least 2".into()));
        }
        let slice_center = list("slice.center")?;
        if let Some(c) = &slice_center {
            check_len("slice.center", c, p)?;
        }

        Ok(Self {
            model,
            true_alpha,
            simulation,
            trajectory_stride,
            obs_file: get("obs.file").map(PathBuf::from),
            param_box,
            filter,
            y0,
            q0,
            initial_update: flag("filter.initial_update")?.unwrap_or(false),
            filter_alpha,
            algo: get("algo").map(|v| v.parse()).transpose()?.unwrap_or(Algorithm::Umdac),
            umdac,
            local,
            reps,
            jobs: int("jobs")?.unwrap_or(0),
            seed: get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(1),
            out: PathBuf::from(get("out").unwrap_or("out")),
            hist_bins,
            slice_coords,
            slice_grid,
            slice_center,
        })
    }

    pub fn initial_mean(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y0)
    }

    pub fn initial_cov(&self) -> DMatrix<f64> {
        let d = self.y0.len();
        DMatrix::identity(d, d) * self.q0
    }
}
